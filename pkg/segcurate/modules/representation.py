"""
Segment Representation
Two-branch MLP encoder over (start, end) rasters trained with a supervised contrastive loss
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from segcurate.core.exceptions import DatasetException, DatasetFormatException, ShapeMismatchException
from segcurate.core.tensor_io import read_tensor_file, write_tensor_file
from segcurate.modules.render import RasterPair, TrajRaster
from segcurate.schemas.config import TrainConfig
from segcurate.utils.helpers import derive_rng

logger = logging.getLogger(__name__)

BRANCHES = ("start", "end")
PARAMS_FORMAT = "segcurate-encoder"
NORM_TOLERANCE = 1e-6
_ENCODE_CHUNK = 1024


@dataclass(frozen=True)
class Architecture:
    input_shape: Tuple[int, int]
    hidden_sizes: Tuple[int, ...]
    embed_dim: int
    activation: str = "relu"

    @property
    def input_dim(self) -> int:
        return self.input_shape[0] * self.input_shape[1]

    @property
    def branch_dim(self) -> int:
        return self.embed_dim // 2

    def layer_names(self, branch: str) -> List[str]:
        return [f"{branch}.hidden{i}" for i in range(len(self.hidden_sizes))] + [f"{branch}.proj"]

    def layer_shapes(self) -> List[Tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_sizes, self.branch_dim]
        return list(zip(sizes[:-1], sizes[1:]))

    def to_dict(self) -> dict:
        return {
            "format": PARAMS_FORMAT,
            "input_shape": list(self.input_shape),
            "hidden_sizes": list(self.hidden_sizes),
            "embed_dim": self.embed_dim,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Architecture":
        if data.get("format") != PARAMS_FORMAT:
            raise DatasetFormatException(f"not an encoder params file (format={data.get('format')!r})")
        if data.get("activation", "relu") != "relu":
            raise DatasetFormatException(f"unsupported activation {data.get('activation')!r}")
        return cls(tuple(data["input_shape"]), tuple(data["hidden_sizes"]), int(data["embed_dim"]))


@dataclass
class EncoderParams:
    """Layer weights (fan_in, fan_out) and biases for both branches, in declaration order"""
    architecture: Architecture
    tensors: Dict[str, np.ndarray] = field(default_factory=OrderedDict)

    def weight(self, layer: str) -> np.ndarray:
        return self.tensors[f"{layer}.weight"]

    def bias(self, layer: str) -> np.ndarray:
        return self.tensors[f"{layer}.bias"]

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.architecture,
                             OrderedDict((k, v.copy()) for k, v in self.tensors.items()))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())

    def equals(self, other: "EncoderParams") -> bool:
        return (self.architecture == other.architecture
                and list(self.tensors) == list(other.tensors)
                and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors))


@dataclass(frozen=True, eq=False)
class Embedding:
    z: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64).reshape(-1)
        if self.normalized and abs(np.linalg.norm(z) - 1.0) > NORM_TOLERANCE:
            raise ValueError("normalized embedding must have unit norm")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


@dataclass
class TrainResult:
    params: EncoderParams
    loss_trace: List[float]


def init_params(architecture: Architecture, rng: np.random.Generator) -> EncoderParams:
    """He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases"""
    tensors: Dict[str, np.ndarray] = OrderedDict()
    for branch in BRANCHES:
        for name, (fan_in, fan_out) in zip(architecture.layer_names(branch), architecture.layer_shapes()):
            limit = math.sqrt(6.0 / fan_in)
            tensors[f"{name}.weight"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            tensors[f"{name}.bias"] = np.zeros(fan_out)
    return EncoderParams(architecture, tensors)


def architecture_for(input_shape: Tuple[int, int], cfg: TrainConfig) -> Architecture:
    return Architecture(tuple(input_shape), tuple(cfg.hidden_sizes), cfg.embed_dim)


# Forward / backward

def _branch_forward(params: EncoderParams, branch: str, x: np.ndarray):
    activations = [x]
    pre_activations = []
    names = params.architecture.layer_names(branch)
    for name in names[:-1]:
        pre = activations[-1] @ params.weight(name) + params.bias(name)
        pre_activations.append(pre)
        activations.append(np.maximum(pre, 0.0))
    out = activations[-1] @ params.weight(names[-1]) + params.bias(names[-1])
    return out, (activations, pre_activations)


def _branch_backward(params: EncoderParams, branch: str, d_out: np.ndarray, cache,
                     grads: Dict[str, np.ndarray]) -> None:
    activations, pre_activations = cache
    names = params.architecture.layer_names(branch)
    grads[f"{names[-1]}.weight"] = activations[-1].T @ d_out
    grads[f"{names[-1]}.bias"] = d_out.sum(axis=0)
    delta = d_out @ params.weight(names[-1]).T
    for i in range(len(names) - 2, -1, -1):
        delta = delta * (pre_activations[i] > 0)  # relu'(0) = 0
        grads[f"{names[i]}.weight"] = activations[i].T @ delta
        grads[f"{names[i]}.bias"] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weight(names[i]).T


def _normalize_rows(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(u, axis=1)
    z = np.zeros_like(u)
    nonzero = norms > 0
    z[nonzero] = u[nonzero] / norms[nonzero, None]
    # zero vector maps to the first basis vector
    z[~nonzero, 0] = 1.0
    return z, norms


def _flatten(x: np.ndarray, architecture: Architecture) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        if tuple(x.shape[1:]) != tuple(architecture.input_shape):
            raise ShapeMismatchException(f"raster shape {tuple(x.shape[1:])} does not match "
                                         f"encoder input {tuple(architecture.input_shape)}")
        return x.reshape(len(x), -1)
    if x.ndim != 2 or x.shape[1] != architecture.input_dim:
        raise ShapeMismatchException(f"expected flattened rasters of width {architecture.input_dim}, "
                                     f"got shape {x.shape}")
    return x


def encode_arrays(starts: np.ndarray, ends: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Unit-norm embeddings (N, embed_dim) for stacked start/end rasters"""
    starts = _flatten(starts, params.architecture)
    ends = _flatten(ends, params.architecture)
    if len(starts) != len(ends):
        raise ShapeMismatchException("start and end raster counts differ")
    chunks = []
    for lo in range(0, len(starts), _ENCODE_CHUNK):
        start_out, _ = _branch_forward(params, "start", starts[lo:lo + _ENCODE_CHUNK])
        end_out, _ = _branch_forward(params, "end", ends[lo:lo + _ENCODE_CHUNK])
        chunks.append(_normalize_rows(np.concatenate([start_out, end_out], axis=1))[0])
    if not chunks:
        return np.zeros((0, params.architecture.embed_dim))
    return np.concatenate(chunks, axis=0)


def encode(start: TrajRaster, end: TrajRaster, params: EncoderParams) -> Embedding:
    """Project both rasters, concatenate and L2-normalize"""
    z = encode_arrays(start.pixels[None], end.pixels[None], params)[0]
    return Embedding(z, normalized=True)


def encode_pairs(pairs: Sequence[RasterPair], params: EncoderParams) -> np.ndarray:
    if not pairs:
        return np.zeros((0, params.architecture.embed_dim))
    starts, ends = stack_pairs(pairs)
    return encode_arrays(starts, ends, params)


def stack_pairs(pairs: Sequence[RasterPair]) -> Tuple[np.ndarray, np.ndarray]:
    starts = np.stack([start.pixels for start, _ in pairs])
    ends = np.stack([end.pixels for _, end in pairs])
    return starts, ends


# Loss

def supcon_loss_arrays(Z: np.ndarray, labels: np.ndarray, temperature: float) -> Tuple[float, np.ndarray]:
    """Supervised contrastive loss over one shared batch and its gradient w.r.t. Z.

    Each anchor a contributes -(1/|B_y(a)|) * sum over same-label partners b of
    log softmax_{b' != a}(z_a . z_b' / t)[b]; anchors without partners contribute 0.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n = len(Z)
    if n < 2:
        return 0.0, np.zeros_like(Z)

    logits = (Z @ Z.T) / temperature
    np.fill_diagonal(logits, -np.inf)
    log_prob = logits - logsumexp(logits, axis=1, keepdims=True)
    np.fill_diagonal(log_prob, 0.0)

    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    class_size = np.where(labels, labels.sum(), n - labels.sum()).astype(np.float64)
    weight = 1.0 / class_size
    partners = same.sum(axis=1)

    loss = float(-np.sum(weight * np.sum(np.where(same, log_prob, 0.0), axis=1)))

    softmax = np.exp(log_prob)
    np.fill_diagonal(softmax, 0.0)
    G = -weight[:, None] * (same.astype(np.float64) - partners[:, None] * softmax)
    grad = (G + G.T) @ Z / temperature
    return loss, grad


def supcon_loss(batch: Sequence[Tuple[Embedding, bool]], temperature: float) -> Tuple[float, List[np.ndarray]]:
    """Loss and per-embedding gradients for a list of (embedding, is_positive)"""
    if not batch:
        return 0.0, []
    Z = np.stack([embedding.z for embedding, _ in batch])
    labels = np.array([label for _, label in batch], dtype=bool)
    loss, grad = supcon_loss_arrays(Z, labels, temperature)
    return loss, list(grad)


def loss_and_grads(params: EncoderParams, starts: np.ndarray, ends: np.ndarray,
                   labels: np.ndarray, temperature: float) -> Tuple[float, Dict[str, np.ndarray]]:
    """Batch loss and parameter gradients through normalization and both branches"""
    architecture = params.architecture
    starts = _flatten(starts, architecture)
    ends = _flatten(ends, architecture)
    start_out, start_cache = _branch_forward(params, "start", starts)
    end_out, end_cache = _branch_forward(params, "end", ends)
    u = np.concatenate([start_out, end_out], axis=1)
    z, norms = _normalize_rows(u)

    loss, dz = supcon_loss_arrays(z, labels, temperature)

    du = np.zeros_like(u)
    nonzero = norms > 0
    zz = z[nonzero]
    du[nonzero] = (dz[nonzero] - zz * np.sum(zz * dz[nonzero], axis=1, keepdims=True)) / norms[nonzero, None]

    grads: Dict[str, np.ndarray] = {}
    half = architecture.branch_dim
    _branch_backward(params, "start", du[:, :half], start_cache, grads)
    _branch_backward(params, "end", du[:, half:], end_cache, grads)
    return loss, OrderedDict((name, grads[name]) for name in params.tensors)


# Training

def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    """Rescale in place so the global norm is at most max_norm; returns the norm before clipping.

    Below the threshold (or with max_norm=None) the gradients are untouched and the
    update is plain SGD.
    """
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm is not None and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def stratified_batches(n_pos: int, n_neg: int, batch_size: int,
                       rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches with >= 2 of each label whenever the data allows"""
    n_batches = max(1, min(math.ceil((n_pos + n_neg) / batch_size), n_pos // 2, n_neg // 2))
    pos_chunks = np.array_split(rng.permutation(n_pos), n_batches)
    neg_chunks = np.array_split(rng.permutation(n_neg) + n_pos, n_batches)
    return [np.concatenate([p, q]) for p, q in zip(pos_chunks, neg_chunks)]


def train(positives: Sequence[RasterPair], negatives: Sequence[RasterPair],
          cfg: TrainConfig) -> TrainResult:
    """SGD without momentum on the supervised contrastive loss; deterministic for a fixed seed"""
    if not positives or not negatives:
        raise DatasetException("training needs at least one positive and one negative pair")

    starts, ends = stack_pairs(list(positives) + list(negatives))
    architecture = architecture_for(starts.shape[1:], cfg)
    starts = starts.reshape(len(starts), -1)
    ends = ends.reshape(len(ends), -1)
    labels = np.array([True] * len(positives) + [False] * len(negatives))

    rng = derive_rng(cfg.seed)
    params = init_params(architecture, rng)
    trace: List[float] = []

    for epoch in range(cfg.epochs):
        losses = []
        for batch in stratified_batches(len(positives), len(negatives), cfg.batch_size, rng):
            loss, grads = loss_and_grads(params, starts[batch], ends[batch], labels[batch],
                                         cfg.temperature)
            clip_grad_norm(grads, cfg.grad_clip)
            for name, grad in grads.items():
                params.tensors[name] -= cfg.learning_rate * grad
            losses.append(loss)
        trace.append(float(np.mean(losses)))
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: mean loss {trace[-1]:.6f}")
        if not params.all_finite():
            logger.warning(f"Non-finite parameters after epoch {epoch + 1}")

    return TrainResult(params, trace)


# Params file

def save_params(params: EncoderParams, path: Union[str, Path]) -> None:
    write_tensor_file(path, params.architecture.to_dict(), params.tensors.items())
    logger.info(f"Encoder params saved to {path}")


def load_params(path: Union[str, Path]) -> EncoderParams:
    header, tensors = read_tensor_file(path)
    architecture = Architecture.from_dict(header)
    expected = [f"{name}.{kind}" for branch in BRANCHES
                for name in architecture.layer_names(branch) for kind in ("weight", "bias")]
    if list(tensors) != expected:
        raise DatasetFormatException("encoder tensors are missing or out of order", str(path))
    params = EncoderParams(architecture, OrderedDict(tensors))
    if not params.all_finite():
        raise DatasetFormatException("encoder params contain non-finite values", str(path))
    return params
