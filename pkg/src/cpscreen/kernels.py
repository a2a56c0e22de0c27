"""Kernels over ligand feature vectors.

Ligands are either dense real vectors or sparse binary fingerprints
(sets of active bit indices, ECFP-style).  All kernels accept both
representations where meaningful; mixing representations in one
evaluation is an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse

from .errors import InvalidInputError

_KINDS = ("linear", "rbf", "tanimoto", "constant_augmented")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One ligand: a dense vector or a sparse fingerprint, never both."""

    dense: np.ndarray | None = None
    indices: tuple[int, ...] | None = None

    @classmethod
    def from_dense(cls, values) -> "FeatureVector":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError("dense feature vector must be 1-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("dense feature vector contains non-finite entries")
        arr = arr.copy()
        arr.flags.writeable = False
        return cls(dense=arr, indices=None)

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "FeatureVector":
        idx = tuple(sorted({int(i) for i in indices}))
        if idx and idx[0] < 0:
            raise InvalidInputError("fingerprint indices must be non-negative")
        return cls(dense=None, indices=idx)

    @property
    def is_sparse(self) -> bool:
        return self.indices is not None

    @property
    def dim(self) -> int | None:
        """Dense dimension; None for sparse fingerprints (unbounded index space)."""
        return None if self.dense is None else int(self.dense.shape[0])

    def key(self) -> tuple:
        """Hashable identity, used to match support points across models."""
        if self.indices is not None:
            return ("s", self.indices)
        return ("d", self.dense.tobytes())

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureVector) and self.key() == other.key()

    def __repr__(self) -> str:  # keep test failures readable
        if self.indices is not None:
            return f"FeatureVector(indices={self.indices!r})"
        return f"FeatureVector(dense={self.dense!r})"


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description, serializable into run configs."""

    kind: str
    gamma: float | None = None
    offset: float | None = None
    base: "KernelSpec | None" = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or self.gamma <= 0:
                raise InvalidInputError("rbf kernel requires gamma > 0")
        elif self.gamma is not None:
            raise InvalidInputError(f"gamma is not a parameter of {self.kind!r}")
        if self.kind == "constant_augmented":
            if self.base is None:
                raise InvalidInputError("constant_augmented requires a base kernel")
            if self.offset is None or self.offset < 0:
                raise InvalidInputError("constant_augmented requires offset >= 0")
        else:
            if self.offset is not None or self.base is not None:
                raise InvalidInputError(f"offset/base are not parameters of {self.kind!r}")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(kind="linear")

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls(kind="rbf", gamma=float(gamma))

    @classmethod
    def tanimoto(cls) -> "KernelSpec":
        return cls(kind="tanimoto")

    @classmethod
    def constant_augmented(cls, base: "KernelSpec", offset: float = 1.0) -> "KernelSpec":
        """Wrap ``base`` as k(x,y) + offset; absorbs a bias term into the kernel."""
        return cls(kind="constant_augmented", offset=float(offset), base=base)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.offset is not None:
            d["offset"] = self.offset
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidInputError("kernel spec must be a mapping with a 'kind'")
        extra = set(d) - {"kind", "gamma", "offset", "base"}
        if extra:
            raise InvalidInputError(f"unknown kernel spec keys: {sorted(extra)}")
        base = cls.from_dict(d["base"]) if "base" in d else None
        return cls(kind=d["kind"], gamma=d.get("gamma"), offset=d.get("offset"), base=base)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Pairwise kernel values over a fixed input list; exactly symmetric."""

    kernel: KernelSpec
    inputs: tuple[FeatureVector, ...]
    values: np.ndarray


def _split_family(xs: Sequence[FeatureVector], name: str) -> bool:
    """True if all sparse, False if all dense; error on mixtures."""
    sparse = [x.is_sparse for x in xs]
    if all(sparse):
        return True
    if not any(sparse):
        return False
    raise InvalidInputError(f"{name} mixes dense and sparse feature vectors")


def _dense_stack(xs: Sequence[FeatureVector], name: str) -> np.ndarray:
    dims = {x.dim for x in xs}
    if len(dims) > 1:
        raise InvalidInputError(f"{name} mixes dense dimensions {sorted(dims)}")
    return np.stack([x.dense for x in xs])


def _sparse_csr(xs: Sequence[FeatureVector], ncols: int) -> scipy.sparse.csr_matrix:
    indptr = np.zeros(len(xs) + 1, dtype=np.int64)
    cols: list[int] = []
    for i, x in enumerate(xs):
        cols.extend(x.indices)
        indptr[i + 1] = len(cols)
    data = np.ones(len(cols))
    return scipy.sparse.csr_matrix(
        (data, np.asarray(cols, dtype=np.int64), indptr), shape=(len(xs), ncols)
    )


def gram_matrix(
    spec: KernelSpec,
    xs: Sequence[FeatureVector],
    ys: Sequence[FeatureVector] | None = None,
) -> np.ndarray:
    """Cross-Gram values[i][j] = k(xs[i], ys[j]); ys=None means ys=xs."""
    if len(xs) == 0 or (ys is not None and len(ys) == 0):
        raise InvalidInputError("gram_matrix requires non-empty inputs")
    same = ys is None
    ys_: Sequence[FeatureVector] = xs if same else ys

    if spec.kind == "constant_augmented":
        return gram_matrix(spec.base, xs, ys) + spec.offset

    xs_sparse = _split_family(xs, "xs")
    ys_sparse = xs_sparse if same else _split_family(ys_, "ys")
    if xs_sparse != ys_sparse:
        raise InvalidInputError("xs and ys use different feature representations")

    if spec.kind == "tanimoto" and not xs_sparse:
        # tanimoto is defined on active-index sets; binarize dense input
        xs = [FeatureVector.from_indices(np.flatnonzero(x.dense)) for x in xs]
        ys_ = xs if same else [FeatureVector.from_indices(np.flatnonzero(y.dense)) for y in ys_]
        xs_sparse = True

    if xs_sparse:
        width = max((x.indices[-1] + 1 for x in list(xs) + list(ys_) if x.indices), default=0)
        a = _sparse_csr(xs, width)
        b = a if same else _sparse_csr(ys_, width)
        inter = np.asarray((a @ b.T).todense(), dtype=float)
        if spec.kind == "linear":
            return inter
        sa = np.asarray(a.sum(axis=1), dtype=float).ravel()
        sb = sa if same else np.asarray(b.sum(axis=1), dtype=float).ravel()
        if spec.kind == "tanimoto":
            union = sa[:, None] + sb[None, :] - inter
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
            return out
        if spec.kind == "rbf":
            sqdist = np.maximum(sa[:, None] + sb[None, :] - 2.0 * inter, 0.0)
            return np.exp(-spec.gamma * sqdist)
    else:
        xmat = _dense_stack(xs, "xs")
        ymat = xmat if same else _dense_stack(ys_, "ys")
        if xmat.shape[1] != ymat.shape[1]:
            raise InvalidInputError(
                f"dense dimension mismatch: {xmat.shape[1]} vs {ymat.shape[1]}"
            )
        if spec.kind == "linear":
            return xmat @ ymat.T
        if spec.kind == "rbf":
            sq = (
                np.sum(xmat**2, axis=1)[:, None]
                + np.sum(ymat**2, axis=1)[None, :]
                - 2.0 * (xmat @ ymat.T)
            )
            return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    raise AssertionError(f"unhandled kernel kind {spec.kind!r}")


def kernel_eval(spec: KernelSpec, x: FeatureVector, y: FeatureVector) -> float:
    """Single kernel evaluation k(x, y)."""
    return float(gram_matrix(spec, [x], [y])[0, 0])


def gram(spec: KernelSpec, inputs: Sequence[FeatureVector]) -> GramMatrix:
    """Gram matrix over ``inputs`` with symmetry enforced exactly."""
    if len(inputs) == 0:
        raise InvalidInputError("gram requires a non-empty input list")
    values = gram_matrix(spec, inputs)
    values = np.triu(values) + np.triu(values, 1).T
    values.flags.writeable = False
    return GramMatrix(kernel=spec, inputs=tuple(inputs), values=values)


def tlk_eval(target_sim: float, ligand_kernel_value: float) -> float:
    """Joint target-ligand kernel value: the product of the two parts."""
    return float(target_sim) * float(ligand_kernel_value)
