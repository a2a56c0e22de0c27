"""Benchmark ingestion, similarity normalization, and synthetic data.

File formats:
  * ligand table: TSV with header ``target_id  ligand_id  label  fingerprint``
    where fingerprint is a comma-separated ascending list of active bit
    indices (empty string = empty fingerprint);
  * similarity matrix: CSV with header ``id,<id1>,...,<idn>`` and one row
    per id in header order;
  * models: JSON documents.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, FormatError, InvalidInputError
from .kernels import FeatureVector, KernelSpec
from .rng import rng_from_seed
from .svr import LabelledDataset, SvrModel

LIGAND_COLUMNS = ("target_id", "ligand_id", "label", "fingerprint")

# ground-truth model norm ~1 keeps the projection-resemblance premise
# quantitatively consistent with sum-normalized similarities
_MODEL_NORM = 1.0
# fingerprint bit density; sparse bits mimic real binary fingerprints and
# keep ligand Gram matrices well conditioned
_BIT_DENSITY = 0.15


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric non-negative target similarities with positive diagonal."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(self.ids)
        if len(set(ids)) != len(ids):
            raise InvalidInputError("similarity ids must be unique")
        values = np.asarray(self.values, dtype=float)
        n = len(ids)
        if values.shape != (n, n):
            raise InvalidInputError(
                f"similarity values shape {values.shape} does not match {n} ids"
            )
        if n and not np.all(np.isfinite(values)):
            raise InvalidInputError("similarity values contain non-finite entries")
        if n and np.abs(values - values.T).max() > 1e-9:
            raise InvalidInputError("similarity matrix is not symmetric within 1e-9")
        if n and np.any(np.diag(values) <= 0):
            raise InvalidInputError("similarity diagonal entries must be > 0")
        if n and np.any(values < 0):
            raise InvalidInputError("similarity entries must be >= 0")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    def index(self, target_id: str) -> int:
        try:
            return self.ids.index(target_id)
        except ValueError:
            raise InvalidInputError(f"unknown target id {target_id!r}") from None

    def value(self, a: str, b: str) -> float:
        return float(self.values[self.index(a), self.index(b)])

    def subset(self, ids: Sequence[str]) -> "SimilarityMatrix":
        idx = [self.index(i) for i in ids]
        return SimilarityMatrix(ids=tuple(ids), values=self.values[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class TargetData:
    """One target: its id, labelled ligand dataset, optional sequence."""

    target_id: str
    dataset: LabelledDataset
    sequence: str | None = None


@dataclass(frozen=True, eq=False)
class TargetBenchmark:
    """Named targets with datasets plus a similarity matrix covering them."""

    targets: tuple[TargetData, ...]
    similarity: SimilarityMatrix

    def __post_init__(self):
        targets = tuple(self.targets)
        ids = [t.target_id for t in targets]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("target ids must be unique")
        known = set(self.similarity.ids)
        missing = [i for i in ids if i not in known]
        if missing:
            raise InvalidInputError(f"similarity matrix does not cover targets {missing}")
        object.__setattr__(self, "targets", targets)

    @property
    def target_ids(self) -> tuple[str, ...]:
        return tuple(t.target_id for t in self.targets)

    def get(self, target_id: str) -> TargetData:
        for t in self.targets:
            if t.target_id == target_id:
                return t
        raise InvalidInputError(f"unknown target id {target_id!r}")


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic benchmark generator."""

    n_targets: int
    m_ligands: int
    dim: int
    noise_sd: float
    similarity_decay: float
    seed: int

    def __post_init__(self):
        if self.n_targets < 1 or self.m_ligands < 1 or self.dim < 1:
            raise InvalidInputError("n_targets, m_ligands, and dim must be >= 1")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be >= 0")
        if self.similarity_decay <= 0:
            raise InvalidInputError("similarity_decay must be > 0")


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"could not parse {what} from {token!r}", line=line) from None


def load_similarity(path) -> SimilarityMatrix:
    """Parse a similarity CSV; row ids must repeat the header order."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines()]
    if not lines:
        raise FormatError("empty similarity file", line=1)
    header = lines[0].split(",")
    if header[0] != "id" or len(header) < 2:
        raise FormatError("similarity header must be 'id,<id1>,...'", line=1)
    ids = [h.strip() for h in header[1:]]
    n = len(ids)
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise FormatError(f"expected {n} similarity rows, found {len(rows)}", line=len(lines))
    values = np.zeros((n, n))
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        lineno = i + 2
        if len(parts) != n + 1:
            raise FormatError(f"expected {n + 1} fields, found {len(parts)}", line=lineno)
        if parts[0].strip() != ids[i]:
            raise FormatError(
                f"row id {parts[0].strip()!r} does not match header id {ids[i]!r}",
                line=lineno,
            )
        for j, tok in enumerate(parts[1:]):
            values[i, j] = _parse_float(tok, lineno, "similarity value")
    return SimilarityMatrix(ids=tuple(ids), values=values)


def _parse_fingerprint(token: str, line: int) -> FeatureVector:
    if token == "":
        return FeatureVector.from_indices(())
    indices = []
    for part in token.split(","):
        try:
            idx = int(part)
        except ValueError:
            raise FormatError(f"bad fingerprint index {part!r}", line=line) from None
        if idx < 0:
            raise FormatError(f"negative fingerprint index {idx}", line=line)
        if indices and idx <= indices[-1]:
            raise FormatError("fingerprint indices must be strictly ascending", line=line)
        indices.append(idx)
    return FeatureVector.from_indices(indices)


def load_benchmark(ligand_path, similarity_path) -> TargetBenchmark:
    """Load and validate a benchmark from a ligand TSV and a similarity CSV."""
    similarity = load_similarity(similarity_path)
    known = set(similarity.ids)
    text = Path(ligand_path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty ligand file", line=1)
    header = tuple(lines[0].split("\t"))
    if header != LIGAND_COLUMNS:
        raise FormatError(
            f"ligand header must be {chr(9).join(LIGAND_COLUMNS)!r}", line=1
        )
    per_target: dict[str, tuple[list[FeatureVector], list[float]]] = {}
    order: list[str] = []
    for i, ln in enumerate(lines[1:]):
        if not ln.strip():
            continue
        lineno = i + 2
        parts = ln.split("\t")
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields, found {len(parts)}", line=lineno)
        target_id, _ligand_id, label_tok, fp_tok = parts
        if target_id not in known:
            raise InvalidInputError(
                f"line {lineno}: target id {target_id!r} is not in the similarity matrix"
            )
        label = _parse_float(label_tok, lineno, "label")
        if not math.isfinite(label):
            raise InvalidInputError(f"line {lineno}: non-finite label {label_tok!r}")
        fp = _parse_fingerprint(fp_tok, lineno)
        if target_id not in per_target:
            per_target[target_id] = ([], [])
            order.append(target_id)
        per_target[target_id][0].append(fp)
        per_target[target_id][1].append(label)
    if not order:
        raise FormatError("ligand file contains no data rows", line=1)
    targets = tuple(
        TargetData(
            target_id=tid,
            dataset=LabelledDataset(
                inputs=tuple(per_target[tid][0]),
                labels=np.asarray(per_target[tid][1]),
            ),
        )
        for tid in order
    )
    return TargetBenchmark(targets=targets, similarity=similarity)


def save_benchmark(benchmark: TargetBenchmark, ligand_path, similarity_path) -> None:
    """Write a benchmark back out; only sparse fingerprints are representable."""
    lig_lines = ["\t".join(LIGAND_COLUMNS)]
    for t in benchmark.targets:
        for i, (x, y) in enumerate(zip(t.dataset.inputs, t.dataset.labels)):
            if not x.is_sparse:
                raise InvalidInputError(
                    "only sparse fingerprints can be written to the ligand table"
                )
            fp = ",".join(str(j) for j in x.indices)
            lig_lines.append(f"{t.target_id}\t{t.target_id}:{i}\t{y!r}\t{fp}")
    Path(ligand_path).write_text("\n".join(lig_lines) + "\n", encoding="utf-8")

    sim = benchmark.similarity
    sim_lines = ["id," + ",".join(sim.ids)]
    for i, tid in enumerate(sim.ids):
        sim_lines.append(tid + "," + ",".join(repr(v) for v in sim.values[i]))
    Path(similarity_path).write_text("\n".join(sim_lines) + "\n", encoding="utf-8")


def normalize_for_orphan(
    sim: SimilarityMatrix, orphan_id: str, normalize_rows: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Similarity vectors for one orphan instance, in supervised-id order.

    Default reading: the orphan-to-supervised similarities are scaled to
    sum to 1 and self-similarities pass through raw.  With
    ``normalize_rows`` every target's row is scaled by the sum of its
    off-diagonal entries, so self-similarities participate as well
    (non-default; kept for the alternative reading of the protocol).
    """
    o = sim.index(orphan_id)
    sup = [i for i in range(len(sim.ids)) if i != o]
    if not sup:
        raise InvalidInputError("no supervised targets besides the orphan")
    row = sim.values[o, sup].astype(float)
    total = row.sum()
    if total <= 0:
        raise DegenerateInputError(
            f"orphan {orphan_id!r} has zero similarity mass to supervised targets"
        )
    orphan_sims = row / total
    diag = np.diag(sim.values)
    if not normalize_rows:
        self_sims = diag[sup].copy()
    else:
        factors = sim.values.sum(axis=1) - diag
        if np.any(factors[sup] <= 0):
            raise DegenerateInputError("a supervised target has zero off-diagonal mass")
        self_sims = diag[sup] / factors[sup]
    return orphan_sims, self_sims


def kmer_similarity(seq_a: str, seq_b: str, k: int) -> float:
    """Cosine similarity of k-mer count vectors; 0 when a sequence is shorter than k."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if len(seq_a) < k or len(seq_b) < k:
        return 0.0
    ca = Counter(seq_a[i : i + k] for i in range(len(seq_a) - k + 1))
    cb = Counter(seq_b[i : i + k] for i in range(len(seq_b) - k + 1))
    if ca == cb:
        return 1.0
    dot = sum(v * cb.get(key, 0) for key, v in ca.items())
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


@dataclass(frozen=True, eq=False)
class SynthDetails:
    """Synthetic benchmark plus the latent truth that generated it."""

    benchmark: TargetBenchmark
    positions: np.ndarray
    weights: np.ndarray  # n_targets x dim ground-truth weight vectors


def synth_generate_detailed(
    config: SynthConfig, positions: Sequence[float] | None = None
) -> SynthDetails:
    """Generate a benchmark and return the latent positions/weights too.

    Targets sit on a latent line (one unit of spacing per target on
    average).  Ground-truth weight vectors follow a stationary
    autoregressive chain along the line, so the model alignment
    cos(w_i, w_j) tracks exp(-decay * |pos_i - pos_j|) - the same law the
    similarity matrix uses.  Closer targets therefore have closer models,
    and the projection-resemblance premise holds up to sampling noise.
    Ligands are random sparse binary fingerprints over ``dim`` bits;
    labels are <w_i, x> plus Gaussian noise.
    """
    rng = rng_from_seed(config.seed)
    n, m, dim = config.n_targets, config.m_ligands, config.dim
    if positions is None:
        pos = rng.uniform(0.0, float(n), size=n)
    else:
        pos = np.asarray(positions, dtype=float)
        if pos.shape != (n,):
            raise InvalidInputError(f"positions must have shape ({n},)")
    order = np.argsort(pos, kind="stable")
    weights = np.zeros((n, dim))
    state = rng.standard_normal(dim) / np.sqrt(dim)
    weights[order[0]] = state
    for prev, cur in zip(order[:-1], order[1:]):
        rho = float(np.exp(-config.similarity_decay * (pos[cur] - pos[prev])))
        state = rho * state + np.sqrt(max(0.0, 1.0 - rho * rho)) * (
            rng.standard_normal(dim) / np.sqrt(dim)
        )
        weights[cur] = state
    weights = _MODEL_NORM * weights

    values = np.exp(-config.similarity_decay * np.abs(pos[:, None] - pos[None, :]))
    np.fill_diagonal(values, 1.0)
    ids = tuple(f"t{i + 1:02d}" for i in range(n))
    similarity = SimilarityMatrix(ids=ids, values=values)

    targets = []
    for i in range(n):
        bits = rng.random((m, dim)) < _BIT_DENSITY
        labels = bits.astype(float) @ weights[i]
        if config.noise_sd > 0:
            labels = labels + config.noise_sd * rng.standard_normal(m)
        inputs = tuple(
            FeatureVector.from_indices(np.flatnonzero(row)) for row in bits
        )
        targets.append(
            TargetData(target_id=ids[i], dataset=LabelledDataset(inputs, labels))
        )
    benchmark = TargetBenchmark(targets=tuple(targets), similarity=similarity)
    return SynthDetails(benchmark=benchmark, positions=pos, weights=weights)


def synth_generate(config: SynthConfig) -> TargetBenchmark:
    """Deterministic synthetic benchmark (see ``synth_generate_detailed``)."""
    return synth_generate_detailed(config).benchmark


def _feature_to_json(x: FeatureVector) -> dict:
    if x.is_sparse:
        return {"indices": list(x.indices)}
    return {"dense": [float(v) for v in x.dense]}


def _feature_from_json(d: dict) -> FeatureVector:
    if "indices" in d:
        return FeatureVector.from_indices(d["indices"])
    if "dense" in d:
        return FeatureVector.from_dense(d["dense"])
    raise FormatError("feature vector needs 'indices' or 'dense'")


def save_model(model: SvrModel, path) -> None:
    """Serialize a trained model to JSON."""
    doc = {
        "kernel": model.kernel.to_dict(),
        "coefficients": [float(c) for c in model.coefficients],
        "support": [_feature_to_json(x) for x in model.support_inputs],
    }
    Path(path).write_text(json.dumps(doc, allow_nan=False), encoding="utf-8")


def load_model(path) -> SvrModel:
    """Load a model written by ``save_model``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad model file: {exc}") from None
    try:
        return SvrModel(
            coefficients=np.asarray(doc["coefficients"], dtype=float),
            support_inputs=tuple(_feature_from_json(d) for d in doc["support"]),
            kernel=KernelSpec.from_dict(doc["kernel"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"model file missing field: {exc}") from None
