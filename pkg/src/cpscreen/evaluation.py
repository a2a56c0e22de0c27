"""Leave-one-out orphan screening over repeated subsampled draws.

Every target plays the orphan once per draw.  Methods only ever see the
orphan's ligand inputs, never its labels; the held-out labels enter
afterwards, in the RMSE.  All randomness is derived from the protocol
seed plus stable work-unit labels, so draws, folds, and searches can run
in any order or thread count with identical results.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baselines import (
    BaselineSpec,
    avg_clo_weights,
    avg_weights,
    select_extreme,
    supervised_fraction_eval,
    tlk_grid_search,
    tlk_predict_batch,
    tlk_train,
)
from .cp import CpConfig, CpSolution, assemble_system, predict_orphan_batch, solve_cp_beta, solve_scp
from .data import TargetBenchmark, TargetData, normalize_for_orphan
from .errors import InvalidInputError
from .kernels import KernelSpec
from .report import EvaluationReport, TargetReport
from .rng import rng_for, stable_int
from .svr import SvrModel, SvrParams, grid_search, train_svr

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.05, 0.10, 0.30, 0.50, 0.80)


@dataclass(frozen=True)
class ProtocolConfig:
    """Knobs of the screening protocol; defaults follow the benchmark setup."""

    n_draws: int = 10
    ligands_per_draw: int = 240
    seed: int = 0
    cp: CpConfig = CpConfig()
    c_grid: tuple[float, ...] = tuple(2.0**i for i in range(-5, 6))
    eps_grid: tuple[float, ...] = (0.1, 0.01, 0.001)
    folds: int = 3
    kernel: KernelSpec = KernelSpec.linear()

    def __post_init__(self):
        if self.n_draws < 1 or self.ligands_per_draw < 1 or self.folds < 1:
            raise InvalidInputError("protocol counts must be >= 1")
        if not self.c_grid or not self.eps_grid:
            raise InvalidInputError("hyperparameter grids must be non-empty")


def rmse(predictions, labels) -> float:
    """Root mean squared error between two equal-length vectors."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.ndim != 1 or y.ndim != 1 or p.shape != y.shape:
        raise InvalidInputError("predictions and labels must be equal-length vectors")
    if p.size == 0:
        raise InvalidInputError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((p - y) ** 2)))


def draw_subsample(benchmark: TargetBenchmark, m: int, seed: int) -> TargetBenchmark:
    """Per-target sample of m ligands without replacement, seeded per target."""
    targets = []
    for t in benchmark.targets:
        size = t.dataset.size
        if size < m:
            raise InvalidInputError(
                f"target {t.target_id!r} has {size} ligands, fewer than m={m}"
            )
        idx = np.sort(rng_for(seed, "target", t.target_id).choice(size, m, replace=False))
        targets.append(
            TargetData(t.target_id, t.dataset.subset(idx), sequence=t.sequence)
        )
    return TargetBenchmark(targets=tuple(targets), similarity=benchmark.similarity)


def _map_units(worker, units, threads: int) -> dict:
    if threads <= 1:
        return {u: worker(u) for u in units}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(worker, units))
    return dict(zip(units, results))


def _train_target_models(
    sub: TargetBenchmark, protocol: ProtocolConfig, draw: int
):
    """Grid-search and train one SVR per target of a drawn benchmark."""

    def unit(i: int):
        t = sub.targets[i]
        params = grid_search(
            t.dataset,
            protocol.c_grid,
            protocol.eps_grid,
            protocol.kernel,
            protocol.folds,
            seed=stable_int(protocol.seed, "grid", draw, t.target_id),
        )
        return train_svr(t.dataset, params)

    return unit


def _beta_solution(weights) -> CpSolution:
    return CpSolution(form="beta", values=np.asarray(weights, dtype=float))


def _one_hot(n: int, i: int) -> np.ndarray:
    w = np.zeros(n)
    w[i] = 1.0
    return w


def _fold_predictions(
    sub: TargetBenchmark,
    orphan_index: int,
    models,
    methods: Sequence[BaselineSpec],
    protocol: ProtocolConfig,
    draw: int,
    normalize_rows: bool,
    tlk_raw_similarity: bool,
) -> dict[str, np.ndarray | Exception]:
    """Per-method orphan predictions for one fold.

    Reads the orphan's inputs only; its labels stay with the caller.
    ``models`` maps supervised target index -> SvrModel or Exception.
    """
    ids = list(sub.target_ids)
    orphan_id = ids[orphan_index]
    sup_idx = [i for i in range(len(ids)) if i != orphan_index]
    sup_ids = [ids[i] for i in sup_idx]
    sim_sub = sub.similarity.subset(ids)
    orphan_sims, self_sims = normalize_for_orphan(sim_sub, orphan_id, normalize_rows)
    orphan_inputs = sub.targets[orphan_index].dataset.inputs
    n_sup = len(sup_idx)

    out: dict[str, np.ndarray | Exception] = {}
    sup_models: list[SvrModel] | None = None
    model_error: Exception | None = None
    if any(m.kind not in ("tlk", "tlk_clo") for m in methods):
        failed = [i for i in sup_idx if isinstance(models[i], Exception)]
        if failed:
            model_error = models[failed[0]]
        else:
            sup_models = [models[i] for i in sup_idx]

    for method in methods:
        token = method.token()
        try:
            if method.kind in ("tlk", "tlk_clo"):
                restrict = None
                if method.kind == "tlk_clo":
                    if method.k > n_sup:
                        raise InvalidInputError(
                            f"tlk_clo k={method.k} exceeds {n_sup} supervised targets"
                        )
                    order = np.lexsort((np.arange(n_sup), -orphan_sims))
                    restrict = sorted(int(j) for j in order[: method.k])
                datasets = [sub.targets[i].dataset for i in sup_idx]
                seed = stable_int(protocol.seed, "tlk", draw, orphan_id, token)
                c, eps = tlk_grid_search(
                    datasets, sup_ids, sim_sub, protocol.c_grid, protocol.eps_grid,
                    protocol.kernel, protocol.folds, seed, restrict_to=restrict,
                )
                model = tlk_train(
                    datasets, sup_ids, sim_sub,
                    SvrParams(c=c, epsilon=eps, kernel=protocol.kernel),
                    restrict_to=restrict,
                )
                if tlk_raw_similarity:
                    pred_sims = {t: sim_sub.value(orphan_id, t) for t in sup_ids}
                else:
                    pred_sims = dict(zip(sup_ids, orphan_sims))
                out[token] = tlk_predict_batch(model, pred_sims, orphan_inputs)
                continue

            if method.kind == "supervised_fraction":
                raise InvalidInputError(
                    "supervised fractions run through supervised_bounds, not loo_orphan"
                )
            if model_error is not None:
                raise model_error
            assert sup_models is not None
            if method.kind == "cp":
                system = assemble_system(sup_models, orphan_sims, self_sims)
                solution = solve_cp_beta(system, protocol.cp)
            elif method.kind == "scp":
                solution = solve_scp(sup_models, orphan_sims, self_sims)
            elif method.kind == "avg":
                solution = _beta_solution(avg_weights(n_sup))
            elif method.kind == "closest":
                solution = _beta_solution(
                    _one_hot(n_sup, select_extreme(orphan_sims, "closest"))
                )
            elif method.kind == "farthest":
                solution = _beta_solution(
                    _one_hot(n_sup, select_extreme(orphan_sims, "farthest"))
                )
            elif method.kind == "avg_clo":
                solution = _beta_solution(avg_clo_weights(orphan_sims, method.k))
            else:
                raise InvalidInputError(f"unhandled method kind {method.kind!r}")
            out[token] = predict_orphan_batch(solution, sup_models, orphan_inputs)
        except Exception as exc:  # a failing method must not abort the fold
            out[token] = exc
    return out


def orphan_fold_predictions(
    benchmark: TargetBenchmark,
    orphan_id: str,
    methods: Sequence[BaselineSpec],
    protocol: ProtocolConfig,
    draw_index: int = 0,
    normalize_rows: bool = False,
    tlk_raw_similarity: bool = False,
) -> dict[str, np.ndarray]:
    """Predictions of each method for one orphan fold of one draw.

    The orphan's labels are never read; methods see only its inputs.
    Failures propagate (unlike in ``loo_orphan``, which records them).
    """
    sub = draw_subsample(
        benchmark, protocol.ligands_per_draw, stable_int(protocol.seed, "draw", draw_index)
    )
    ids = list(sub.target_ids)
    if orphan_id not in ids:
        raise InvalidInputError(f"unknown orphan id {orphan_id!r}")
    orphan_index = ids.index(orphan_id)
    models: dict[int, SvrModel] = {}
    if any(m.kind not in ("tlk", "tlk_clo") for m in methods):
        train = _train_target_models(sub, protocol, draw_index)
        for i in range(len(ids)):
            if i != orphan_index:
                models[i] = train(i)
    preds = _fold_predictions(
        sub, orphan_index, models, methods, protocol, draw_index,
        normalize_rows, tlk_raw_similarity,
    )
    for token, value in preds.items():
        if isinstance(value, Exception):
            raise value
    return preds  # type: ignore[return-value]


def loo_orphan(
    benchmark: TargetBenchmark,
    methods: Sequence[BaselineSpec],
    protocol: ProtocolConfig,
    threads: int = 1,
    normalize_rows: bool = False,
    tlk_raw_similarity: bool = False,
) -> list[EvaluationReport]:
    """Run the full leave-one-out protocol and aggregate one report per method.

    A method failing on one fold marks that cell as missing without
    aborting the rest of the run.
    """
    methods = [m if isinstance(m, BaselineSpec) else BaselineSpec.parse(m) for m in methods]
    if not methods:
        raise InvalidInputError("no methods requested")
    for m in methods:
        if m.kind == "supervised_fraction":
            raise InvalidInputError(
                "supervised fractions run through supervised_bounds, not loo_orphan"
            )
    ids = list(benchmark.target_ids)
    if len(ids) < 2:
        raise InvalidInputError("leave-one-out needs at least 2 targets")
    tokens = [m.token() for m in methods]
    if len(set(tokens)) != len(tokens):
        raise InvalidInputError("duplicate method tokens requested")

    draws = {
        d: draw_subsample(
            benchmark, protocol.ligands_per_draw, stable_int(protocol.seed, "draw", d)
        )
        for d in range(protocol.n_draws)
    }

    needs_models = any(m.kind not in ("tlk", "tlk_clo") for m in methods)
    models: dict[tuple[int, int], SvrModel | Exception] = {}
    if needs_models:
        def train_unit(unit: tuple[int, int]):
            d, i = unit
            try:
                return _train_target_models(draws[d], protocol, d)(i)
            except Exception as exc:
                return exc

        units = [(d, i) for d in range(protocol.n_draws) for i in range(len(ids))]
        models = _map_units(train_unit, units, threads)

    def fold_unit(unit: tuple[int, int]):
        d, o = unit
        sub = draws[d]
        per_target_models = {i: models.get((d, i)) for i in range(len(ids))}
        preds = _fold_predictions(
            sub, o, per_target_models, methods, protocol, d,
            normalize_rows, tlk_raw_similarity,
        )
        labels = sub.targets[o].dataset.labels
        row: dict[str, float | None] = {}
        for token, value in preds.items():
            if isinstance(value, Exception):
                logger.warning("draw %d orphan %s %s failed: %s", d, ids[o], token, value)
                row[token] = None
            else:
                row[token] = rmse(value, labels)
        logger.info(
            "draw %d orphan %s: %s", d, ids[o],
            " ".join(
                f"{t}={row[t]:.4f}" if row[t] is not None else f"{t}=failed"
                for t in tokens
            ),
        )
        return row

    fold_units = [(d, o) for d in range(protocol.n_draws) for o in range(len(ids))]
    cells = _map_units(fold_unit, fold_units, threads)

    reports = []
    for token in tokens:
        per_target = [
            TargetReport.from_cells(
                ids[o], [cells[(d, o)][token] for d in range(protocol.n_draws)]
            )
            for o in range(len(ids))
        ]
        reports.append(EvaluationReport.from_targets(token, per_target))
    return reports


def supervised_bounds(
    benchmark: TargetBenchmark,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    protocol: ProtocolConfig = ProtocolConfig(),
    threads: int = 1,
) -> list[EvaluationReport]:
    """Supervised upper-bound reference: one report per training fraction."""
    fractions = list(fractions)
    if not fractions:
        raise InvalidInputError("no fractions requested")
    ids = list(benchmark.target_ids)
    draws = {
        d: draw_subsample(
            benchmark, protocol.ligands_per_draw, stable_int(protocol.seed, "draw", d)
        )
        for d in range(protocol.n_draws)
    }

    def unit_fn(unit: tuple[float, int, int]):
        frac, d, i = unit
        t = draws[d].targets[i]
        try:
            return supervised_fraction_eval(
                t.dataset, frac, protocol.c_grid, protocol.eps_grid,
                protocol.kernel, protocol.folds,
                seed=stable_int(protocol.seed, "sup", d, t.target_id, frac),
            )
        except Exception as exc:
            logger.warning(
                "draw %d target %s supervised:%g failed: %s", d, t.target_id, frac, exc
            )
            return None

    units = [
        (frac, d, i)
        for frac in fractions
        for d in range(protocol.n_draws)
        for i in range(len(ids))
    ]
    cells = _map_units(unit_fn, units, threads)

    reports = []
    for frac in fractions:
        per_target = [
            TargetReport.from_cells(
                ids[i], [cells[(frac, d, i)] for d in range(protocol.n_draws)]
            )
            for i in range(len(ids))
        ]
        reports.append(
            EvaluationReport.from_targets(f"supervised:{frac:g}", per_target)
        )
    return reports
