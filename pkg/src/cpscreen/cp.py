"""Corresponding-projections solvers.

Given trained models h_1..h_n for supervised targets and similarities
between targets, these solvers construct a model h_o for an orphan target
by making the projections of h_o onto the h_i resemble the target
similarities.  The quadratic objective

    Q(beta) = nu * b'Gb + b'GNGb - 2 b'G rho + delta'delta

is minimized in closed form; `solve_lcp` is the explicit-weight variant
for linear models, `solve_scp` the optimization-free weighted sum, and
`solve_kcp` the coefficient-space variant over shared support points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .kernels import FeatureVector, KernelSpec, gram_matrix
from .numerics import as_matrix, as_vector, pinv, solve_spd
from .svr import SvrModel, model_inner, predict_batch


@dataclass(frozen=True)
class CpConfig:
    """Solver knobs: nu trades resemblance against model norm, lam
    stabilizes the matrix inversion."""

    nu: float = 5.0
    lam: float = 1.0

    def __post_init__(self):
        if self.nu < 0:
            raise InvalidInputError("nu must be >= 0")
        if self.lam < 0:
            raise InvalidInputError("lam must be >= 0")


@dataclass(frozen=True, eq=False)
class CpSystem:
    """Assembled quadratic system for one orphan instance.

    g[i,j] = <h_i, h_j>; n_diag[i] = k_T(t_i, t_i);
    delta[i] = k_T(t_o, t_i) * ||h_i||; rho[i] = sqrt(n_diag[i]) * delta[i].
    """

    g: np.ndarray
    n_diag: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    model_norms: np.ndarray

    @property
    def size(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True, eq=False)
class CpSolution:
    """Orphan model in one of three parameterizations.

    form "beta": weights over the supervised models.
    form "weight_vector": explicit d-dimensional linear weights.
    form "pi": coefficients over shared support points (carries the
    support list and kernel needed to evaluate it).
    """

    form: str
    values: np.ndarray
    support: tuple[FeatureVector, ...] | None = None
    kernel: KernelSpec | None = None

    def __post_init__(self):
        if self.form not in ("beta", "weight_vector", "pi"):
            raise InvalidInputError(f"unknown solution form {self.form!r}")
        values = as_vector(self.values, "solution values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.form == "pi":
            if self.support is None or self.kernel is None:
                raise InvalidInputError("pi-form solution requires support and kernel")
            if len(self.support) != values.shape[0]:
                raise InvalidInputError("one coefficient per support point required")


def assemble_system(
    models: Sequence[SvrModel], orphan_sims, self_sims
) -> CpSystem:
    """Build G, N, rho, delta from models and target similarities."""
    orphan_sims = as_vector(orphan_sims, "orphan_sims")
    self_sims = as_vector(self_sims, "self_sims")
    n = len(models)
    if n < 1:
        raise InvalidInputError("at least one supervised model is required")
    if orphan_sims.shape[0] != n or self_sims.shape[0] != n:
        raise InvalidInputError(
            f"expected {n} similarities, got {orphan_sims.shape[0]} orphan "
            f"and {self_sims.shape[0]} self"
        )
    if np.any(self_sims < 0):
        raise InvalidInputError("self-similarities must be >= 0")
    kernel = models[0].kernel
    for m in models[1:]:
        if m.kernel != kernel:
            raise InvalidInputError("all models must share one kernel")
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = model_inner(models[i], models[j])
            g[j, i] = g[i, j]
    norms = np.sqrt(np.maximum(np.diag(g), 0.0))
    delta = orphan_sims * norms
    rho = np.sqrt(self_sims) * delta
    return CpSystem(g=g, n_diag=self_sims, rho=rho, delta=delta, model_norms=norms)


def objective(beta, system: CpSystem, nu: float) -> float:
    """Q(beta) = nu*b'Gb + b'GNGb - 2 b'G rho + delta'delta."""
    beta = as_vector(beta, "beta")
    if beta.shape[0] != system.size:
        raise InvalidInputError(
            f"beta has length {beta.shape[0]}, system has n={system.size}"
        )
    gb = system.g @ beta
    return float(
        nu * (beta @ gb)
        + gb @ (system.n_diag * gb)
        - 2.0 * (beta @ (system.g @ system.rho))
        + system.delta @ system.delta
    )


def solve_cp_beta(system: CpSystem, config: CpConfig) -> CpSolution:
    """Closed-form minimizer beta = [nu*G + lam*I + G N G]^+ G rho."""
    g = system.g
    m = config.nu * g + (g * system.n_diag) @ g
    rhs = g @ system.rho
    if config.lam > 0:
        # lam*I makes the matrix positive definite: use the fast solve
        beta = solve_spd(m, rhs, ridge=config.lam)
    else:
        beta = pinv(m) @ rhs
    return CpSolution(form="beta", values=beta)


def solve_lcp(
    weight_vectors: Sequence, orphan_sims, self_sims, nu: float
) -> CpSolution:
    """Explicit-weight variant for linear models in R^d.

    w_o = [nu*I_d + sum_i w_i N_ii w_i']^+ sum_i w_i ||w_i|| sqrt(N_ii) s_i
    """
    ws = [as_vector(w, f"weight_vectors[{i}]") for i, w in enumerate(weight_vectors)]
    orphan_sims = as_vector(orphan_sims, "orphan_sims")
    self_sims = as_vector(self_sims, "self_sims")
    n = len(ws)
    if n < 1:
        raise InvalidInputError("at least one weight vector is required")
    if orphan_sims.shape[0] != n or self_sims.shape[0] != n:
        raise InvalidInputError("similarity vectors must have one entry per model")
    if np.any(self_sims < 0):
        raise InvalidInputError("self-similarities must be >= 0")
    dims = {w.shape[0] for w in ws}
    if len(dims) != 1:
        raise InvalidInputError(f"weight vectors mix dimensions {sorted(dims)}")
    d = dims.pop()
    h = np.stack(ws)  # n x d
    a = nu * np.eye(d) + h.T @ (self_sims[:, None] * h)
    norms = np.linalg.norm(h, axis=1)
    rhs = h.T @ (norms * np.sqrt(self_sims) * orphan_sims)
    if nu > 0:
        w_o = solve_spd(a, rhs)
    else:
        w_o = pinv(a) @ rhs
    return CpSolution(form="weight_vector", values=w_o)


def solve_scp(models: Sequence[SvrModel], orphan_sims, self_sims) -> CpSolution:
    """Optimization-free weighted sum: beta_i = s_i / sqrt(N_ii)."""
    orphan_sims = as_vector(orphan_sims, "orphan_sims")
    self_sims = as_vector(self_sims, "self_sims")
    n = len(models)
    if orphan_sims.shape[0] != n or self_sims.shape[0] != n:
        raise InvalidInputError("similarity vectors must have one entry per model")
    if np.any(self_sims <= 0):
        raise InvalidInputError("self-similarities must be > 0 (division by sqrt)")
    return CpSolution(form="beta", values=orphan_sims / np.sqrt(self_sims))


def _pad_coefficients(
    models: Sequence[SvrModel], shared_support: Sequence[FeatureVector]
) -> np.ndarray:
    """q x n matrix of model coefficients over the shared support.

    Support points a model never saw get coefficient zero; a support point
    of a model that is missing from ``shared_support`` is an error.
    """
    index = {x.key(): j for j, x in enumerate(shared_support)}
    q = len(shared_support)
    pi = np.zeros((q, len(models)))
    for i, model in enumerate(models):
        for coef, x in zip(model.coefficients, model.support_inputs):
            j = index.get(x.key())
            if j is None:
                raise InvalidInputError(
                    f"support point of model {i} is missing from shared_support"
                )
            pi[j, i] += coef
    return pi


def solve_kcp(
    models: Sequence[SvrModel],
    shared_support: Sequence[FeatureVector],
    orphan_sims,
    self_sims,
    nu: float,
    lam: float = 0.0,
) -> CpSolution:
    """Coefficient-space solver over q shared support points.

    pi_o = [nu*K + lam*I_q + sum_i K pi_i N_ii pi_i' K]^+
           sum_i (||h_i|| sqrt(N_ii) s_i) K pi_i

    Preferable to the beta form when q < n (q^3 versus n^3 solve cost).
    """
    orphan_sims = as_vector(orphan_sims, "orphan_sims")
    self_sims = as_vector(self_sims, "self_sims")
    n = len(models)
    if n < 1:
        raise InvalidInputError("at least one supervised model is required")
    if orphan_sims.shape[0] != n or self_sims.shape[0] != n:
        raise InvalidInputError("similarity vectors must have one entry per model")
    if np.any(self_sims < 0):
        raise InvalidInputError("self-similarities must be >= 0")
    if len(shared_support) == 0:
        raise InvalidInputError("shared_support must be non-empty")
    kernel = models[0].kernel
    for m in models[1:]:
        if m.kernel != kernel:
            raise InvalidInputError("all models must share one kernel")
    k = gram_matrix(kernel, list(shared_support))
    k = np.triu(k) + np.triu(k, 1).T
    pi = _pad_coefficients(models, shared_support)  # q x n
    kpi = k @ pi  # q x n, columns K pi_i
    a = nu * k + (kpi * self_sims[None, :]) @ kpi.T
    norms = np.sqrt(np.maximum(np.einsum("ji,ji->i", pi, kpi), 0.0))
    rhs = kpi @ (norms * np.sqrt(self_sims) * orphan_sims)
    if lam > 0:
        pi_o = solve_spd(a, rhs, ridge=lam)
    else:
        pi_o = pinv(a) @ rhs
    return CpSolution(
        form="pi", values=pi_o, support=tuple(shared_support), kernel=kernel
    )


def predict_orphan(
    solution: CpSolution, models: Sequence[SvrModel] | None, x: FeatureVector
) -> float:
    """Evaluate the orphan model at one input."""
    return float(predict_orphan_batch(solution, models, [x])[0])


def predict_orphan_batch(
    solution: CpSolution, models: Sequence[SvrModel] | None, xs
) -> np.ndarray:
    """Evaluate the orphan model at many inputs."""
    xs = list(xs)
    if solution.form == "beta":
        if models is None or len(models) != solution.values.shape[0]:
            raise InvalidInputError("beta solution needs one model per weight")
        out = np.zeros(len(xs))
        for b, model in zip(solution.values, models):
            if b != 0.0:
                out += b * predict_batch(model, xs)
        return out
    if solution.form == "weight_vector":
        w = solution.values
        for x in xs:
            if x.is_sparse or x.dim != w.shape[0]:
                raise InvalidInputError(
                    "weight-vector solution requires dense inputs of matching dimension"
                )
        return np.stack([x.dense for x in xs]) @ w
    # pi form
    assert solution.support is not None and solution.kernel is not None
    return gram_matrix(solution.kernel, xs, list(solution.support)) @ solution.values
