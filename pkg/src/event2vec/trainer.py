"""Training loop: seeded shuffling, batched Adam updates, logging, resume.

Reproducibility contract: with a fixed config and dataset, the whole
run is bit-reproducible on one platform. Every random stream (shuffle
order, per-sequence dropout masks) is derived from ``config.seed`` plus
structural indices (epoch, sequence index), never from global state, so
a run resumed from a saved state at epoch k replays exactly the epochs
an uninterrupted run would have performed.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import geometry as geo
from .dataset import EventDataset, Vocabulary
from .errors import DataFormatError, NumericalError, UsageError
from .fileio import atomic_write_json
from .model import (
    CHECKPOINT_SCHEMA_VERSION,
    DropoutSpec,
    ModelParams,
    gradients,
    init_params,
)
from .seeding import derive_seed, rng_for

TRAIN_STATE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.02
    lambda_recon: float = 1.0
    lambda_consist: float = 1.0
    dropout_rate: float = 0.1
    dim: int = 32
    seed: int = 0
    geometry: geo.Geometry = field(default_factory=lambda: geo.Geometry(geo.EUCLIDEAN, max_norm=10.0))
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    checkpoint_every: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise UsageError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0.0):
            raise UsageError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise UsageError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.dim < 1:
            raise UsageError(f"dim must be >= 1, got {self.dim}")
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise UsageError("adam betas must lie in (0, 1)")
        if not (self.adam_eps > 0.0):
            raise UsageError("adam_eps must be positive")
        if self.checkpoint_every < 0:
            raise UsageError("checkpoint_every must be >= 0")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["geometry"] = self.geometry.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        if "geometry" in d and isinstance(d["geometry"], dict):
            d["geometry"] = geo.Geometry.from_dict(d["geometry"])
        unknown = set(d) - set(TrainConfig.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown train config fields: {', '.join(sorted(unknown))}")
        return TrainConfig(**d)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_total: float
    mean_pred: float
    mean_recon: float
    mean_consist: float
    wall_seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_total": self.mean_total,
            "mean_pred": self.mean_pred,
            "mean_recon": self.mean_recon,
            "mean_consist": self.mean_consist,
            "wall_seconds": self.wall_seconds,
        }


TrainLog = list[EpochRecord]


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Parameters plus first/second moment buffers and a step counter."""

    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            params=params,
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )


def adam_step(state: AdamState, grads: dict[str, np.ndarray], config: TrainConfig) -> AdamState:
    """One bias-corrected Adam update, in place. Returns the state."""
    for key, g in grads.items():
        if key not in state.params:
            raise UsageError(f"gradient for unknown parameter {key!r}")
        if g.shape != state.params[key].shape:
            raise UsageError(
                f"gradient shape {g.shape} does not match parameter {key!r} shape {state.params[key].shape}"
            )
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for key, g in grads.items():
        m, v, p = state.m[key], state.v[key], state.params[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + config.adam_eps)
    return state


# ---------------------------------------------------------------------------
# Resumable state
# ---------------------------------------------------------------------------


@dataclass
class TrainState:
    """Everything needed to continue a run exactly: model, moments, epoch."""

    params: ModelParams
    adam: AdamState
    next_epoch: int


def save_train_state(path: str, state: TrainState) -> None:
    doc = {
        "schema_version": TRAIN_STATE_SCHEMA_VERSION,
        "model": {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "geometry": state.params.geometry.to_dict(),
            "dim": state.params.dim,
            "vocab": list(state.params.vocab.names),
            "embeddings": state.params.embeddings.tolist(),
            "decoder_weights": state.params.decoder_weights.tolist(),
            "decoder_bias": state.params.decoder_bias.tolist(),
        },
        "adam": {
            "step": state.adam.step,
            "m": {k: a.tolist() for k, a in state.adam.m.items()},
            "v": {k: a.tolist() for k, a in state.adam.v.items()},
        },
        "next_epoch": state.next_epoch,
    }
    atomic_write_json(path, doc, indent=None)


def load_train_state(path: str) -> TrainState:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"cannot read train state {path}: {e}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != TRAIN_STATE_SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported train state document")
    try:
        mdoc = doc["model"]
        params = ModelParams(
            geometry=geo.Geometry.from_dict(mdoc["geometry"]),
            vocab=Vocabulary(mdoc["vocab"]),
            embeddings=np.asarray(mdoc["embeddings"], dtype=np.float64),
            decoder_weights=np.asarray(mdoc["decoder_weights"], dtype=np.float64),
            decoder_bias=np.asarray(mdoc["decoder_bias"], dtype=np.float64),
        )
        arrs = _param_arrays(params)
        adam = AdamState(
            params=arrs,
            m={k: np.asarray(v, dtype=np.float64) for k, v in doc["adam"]["m"].items()},
            v={k: np.asarray(v, dtype=np.float64) for k, v in doc["adam"]["v"].items()},
            step=int(doc["adam"]["step"]),
        )
        next_epoch = int(doc["next_epoch"])
    except (KeyError, TypeError, ValueError, UsageError) as e:
        raise DataFormatError(f"{path}: malformed train state: {e}") from None
    for k, a in adam.m.items():
        if k not in arrs or a.shape != arrs[k].shape or adam.v[k].shape != arrs[k].shape:
            raise DataFormatError(f"{path}: moment buffer {k!r} does not match parameter shape")
    return TrainState(params=params, adam=adam, next_epoch=next_epoch)


def _param_arrays(params: ModelParams) -> dict[str, np.ndarray]:
    return {
        "embeddings": params.embeddings,
        "decoder_weights": params.decoder_weights,
        "decoder_bias": params.decoder_bias,
    }


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


def _sequence_work(params, sequence, config: TrainConfig, epoch: int, index: int):
    spec = None
    if config.dropout_rate > 0.0:
        spec = DropoutSpec(config.dropout_rate, derive_seed(config.seed, "dropout", epoch, index))
    return gradients(params, sequence, config.lambda_recon, config.lambda_consist, spec)


def train(
    dataset: EventDataset,
    config: TrainConfig,
    *,
    resume_state: TrainState | None = None,
    checkpoint_path: str | None = None,
    state_path: str | None = None,
    log_stream: IO[str] | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Train on the dataset and return (params, per-epoch log).

    ``resume_state`` continues a run saved by ``save_train_state``;
    epochs before ``state.next_epoch`` are skipped, and the remaining
    ones replay exactly as in the uninterrupted run. The log covers the
    epochs executed by this call.
    """
    if len(dataset) == 0:
        raise UsageError("cannot train on an empty dataset")

    if resume_state is not None:
        params = resume_state.params
        if params.geometry != config.geometry or params.dim != config.dim:
            raise UsageError("resume state geometry/dim does not match the train config")
        if params.vocab != dataset.vocab:
            raise UsageError("resume state vocabulary does not match the dataset")
        adam = resume_state.adam
        start_epoch = resume_state.next_epoch
    else:
        params = init_params(dataset.vocab, config.dim, config.geometry, config.seed)
        adam = AdamState.for_params(_param_arrays(params))
        start_epoch = 0

    n = len(dataset)
    log: TrainLog = []
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for epoch in range(start_epoch, config.epochs):
            t0 = time.perf_counter()
            order = rng_for(config.seed, "shuffle", epoch).permutation(n)
            sums = np.zeros(4)  # pred, recon, consist, total
            for b_start in range(0, n, config.batch_size):
                batch = order[b_start : b_start + config.batch_size]
                if pool is not None:
                    results = list(
                        pool.map(
                            lambda i: _sequence_work(params, dataset.sequences[i], config, epoch, int(i)),
                            batch,
                        )
                    )
                else:
                    results = [
                        _sequence_work(params, dataset.sequences[int(i)], config, epoch, int(i))
                        for i in batch
                    ]
                # Deterministic reduction: sum in batch index order.
                batch_grads: dict[str, np.ndarray] = {}
                for lb, g in results:
                    sums += (lb.pred, lb.recon, lb.consist, lb.total)
                    for k, arr in g.items():
                        if k in batch_grads:
                            batch_grads[k] += arr
                        else:
                            batch_grads[k] = arr
                inv = 1.0 / len(batch)
                for k in batch_grads:
                    batch_grads[k] *= inv
                if not np.isfinite(sums[3]) or any(
                    not np.all(np.isfinite(a)) for a in batch_grads.values()
                ):
                    raise NumericalError(
                        f"non-finite loss or gradient at epoch {epoch}, batch {b_start // config.batch_size}"
                    )
                adam_step(adam, batch_grads, config)
                if config.geometry.is_hyperbolic:
                    emb = adam.params["embeddings"]
                    emb[...] = geo.project_to_ball(emb, config.geometry.c)
            record = EpochRecord(
                epoch=epoch,
                mean_total=float(sums[3] / n),
                mean_pred=float(sums[0] / n),
                mean_recon=float(sums[1] / n),
                mean_consist=float(sums[2] / n),
                wall_seconds=time.perf_counter() - t0,
            )
            log.append(record)
            if log_stream is not None:
                log_stream.write(json.dumps(record.to_dict()) + "\n")
                log_stream.flush()
            done = epoch + 1
            if config.checkpoint_every > 0 and done % config.checkpoint_every == 0 and done < config.epochs:
                _snapshot(params, adam, done, checkpoint_path, state_path)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    _snapshot(params, adam, config.epochs, checkpoint_path, state_path)
    return params, log


def _snapshot(params, adam, next_epoch, checkpoint_path, state_path) -> None:
    from .model import save_checkpoint

    if checkpoint_path is not None:
        save_checkpoint(params, checkpoint_path)
    if state_path is not None:
        save_train_state(state_path, TrainState(params=params, adam=adam, next_epoch=next_epoch))
