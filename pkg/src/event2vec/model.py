"""Additive recurrent event embedding model.

The state after reading a prefix is the running composition of the
embeddings of the events read so far:

* Euclidean: ``h_t = h_{t-1} + e_t`` with optional norm clipping.
* Hyperbolic: ``h_t = h_{t-1} (+)_c e_t`` (Mobius addition), with the
  state re-projected into the ball after every step.

Three losses attach to trajectories. Next-event prediction scores a
linear decoder applied to the state (after a log map at the origin in
the hyperbolic case). Path reconstruction penalises how far stepping
back by the current event lands from the previous state, evaluated on a
dropout-free trajectory. Consistency penalises divergence between two
independently masked trajectories of the same sequence.

Gradients are computed by hand with reverse sweeps over the stored
trajectories; no autodiff framework is involved.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dataset import Vocabulary
from .errors import DataFormatError, UsageError
from .fileio import atomic_write_json
from .seeding import derive_seed, rng_for

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DropoutSpec:
    """Per-coordinate embedding dropout configuration.

    Masks use inverted scaling: kept coordinates are multiplied by
    ``1/(1-rate)`` so the masked embedding is unbiased in expectation.
    The masks are a pure function of (seed, sequence length, dim), so
    equal seeds reproduce equal masks.
    """

    rate: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.rate < 1.0):
            raise UsageError(f"dropout rate must lie in [0, 1), got {self.rate}")


def consistency_seed(seed: int) -> int:
    """Mask seed for the second trajectory of the consistency loss.

    Derived, not user-supplied, so the combined loss needs only one
    dropout seed while the two passes stay independently masked.
    """
    return derive_seed(seed, "consistency")


@dataclass
class ModelParams:
    """Learnable state: one embedding per event, plus a linear decoder."""

    geometry: geo.Geometry
    vocab: Vocabulary
    embeddings: np.ndarray  # (V, d)
    decoder_weights: np.ndarray | None = None  # (V, d)
    decoder_bias: np.ndarray | None = None  # (V,)

    def __post_init__(self) -> None:
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != len(self.vocab):
            raise UsageError(
                f"embeddings must have shape ({len(self.vocab)}, dim), got {self.embeddings.shape}"
            )
        if (self.decoder_weights is None) != (self.decoder_bias is None):
            raise UsageError("decoder weights and bias must be provided together")
        if self.decoder_weights is not None:
            self.decoder_weights = np.asarray(self.decoder_weights, dtype=np.float64)
            self.decoder_bias = np.asarray(self.decoder_bias, dtype=np.float64)
            if self.decoder_weights.shape != self.embeddings.shape:
                raise UsageError("decoder weights must match the embedding table shape")
            if self.decoder_bias.shape != (len(self.vocab),):
                raise UsageError("decoder bias must have one entry per event")

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def has_decoder(self) -> bool:
        return self.decoder_weights is not None

    def copy(self) -> "ModelParams":
        return ModelParams(
            geometry=self.geometry,
            vocab=self.vocab,
            embeddings=self.embeddings.copy(),
            decoder_weights=None if self.decoder_weights is None else self.decoder_weights.copy(),
            decoder_bias=None if self.decoder_bias is None else self.decoder_bias.copy(),
        )


def init_params(
    vocab: Vocabulary,
    dim: int,
    geometry: geo.Geometry,
    seed: int = 0,
    with_decoder: bool = True,
) -> ModelParams:
    """Uniform(-0.5/dim, 0.5/dim) embeddings, zero decoder."""
    if dim < 1:
        raise UsageError(f"dim must be >= 1, got {dim}")
    rng = rng_for(seed, "init")
    emb = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    if geometry.is_hyperbolic:
        emb = geo.project_to_ball(emb, geometry.c)
    dec_w = np.zeros((len(vocab), dim)) if with_decoder else None
    dec_b = np.zeros(len(vocab)) if with_decoder else None
    return ModelParams(geometry, vocab, emb, dec_w, dec_b)


@dataclass
class HiddenTrajectory:
    """Everything the backward sweep needs from one forward pass.

    ``states[0]`` is the origin; ``states[t]`` is the state after event
    ``sequence[t-1]``. ``masked`` holds embeddings after dropout,
    ``inputs`` the vectors actually combined (after any ball
    projection), and ``raw_states`` the combination result before
    clip/projection.
    """

    sequence: np.ndarray  # (T,)
    states: np.ndarray  # (T+1, d)
    inputs: np.ndarray  # (T, d)
    masked: np.ndarray  # (T, d)
    raw_states: np.ndarray  # (T, d)
    masks: np.ndarray | None  # (T, d) or None for a clean pass

    @property
    def length(self) -> int:
        return len(self.sequence)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _dropout_masks(spec: DropoutSpec, length: int, dim: int) -> np.ndarray:
    rng = rng_for(spec.seed, "dropout")
    keep = rng.random((length, dim)) >= spec.rate
    return keep / (1.0 - spec.rate)


def forward(
    params: ModelParams,
    seq: np.ndarray,
    dropout: DropoutSpec | None = None,
) -> HiddenTrajectory:
    """Run one sequence through the recurrence and keep intermediates."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or seq.size == 0:
        raise UsageError("seq must be a non-empty 1-D array of event ids")
    if seq.min() < 0 or seq.max() >= params.vocab_size:
        raise UsageError("seq contains ids outside the vocabulary")
    t_len, dim = len(seq), params.dim
    g = params.geometry

    emb_rows = params.embeddings[seq]
    masks = None
    if dropout is not None and dropout.rate > 0.0:
        masks = _dropout_masks(dropout, t_len, dim)
        masked = emb_rows * masks
    else:
        masked = emb_rows.copy()

    states = np.zeros((t_len + 1, dim))
    if g.is_hyperbolic:
        # Mask rescaling can push a row past the boundary; pull it back
        # before the Mobius step (identity for interior rows).
        inputs = geo.project_to_ball(masked, g.c)
        raw_states = np.empty((t_len, dim))
        for t in range(t_len):
            raw_states[t] = geo.mobius_add(states[t], inputs[t], g.c)
            states[t + 1] = geo.project_to_ball(raw_states[t], g.c)
        return HiddenTrajectory(seq, states, inputs, masked, raw_states, masks)

    inputs = masked
    raw_states = np.cumsum(inputs, axis=0)
    if g.max_norm is None or not np.any(np.sum(raw_states**2, axis=1) > g.max_norm**2):
        states[1:] = raw_states
    else:
        for t in range(t_len):
            raw_states[t] = states[t] + inputs[t]
            states[t + 1] = geo.clip_norm(raw_states[t], g.max_norm)
    return HiddenTrajectory(seq, states, inputs, masked, raw_states, masks)


def state_to_tangent(params: ModelParams, states: np.ndarray) -> np.ndarray:
    """Decoder input: the state itself, or its log map for ball states."""
    if params.geometry.is_hyperbolic:
        return geo.log_map_origin(states, params.geometry.c)
    return np.asarray(states, dtype=np.float64)


def predict_logits(params: ModelParams, states: np.ndarray) -> np.ndarray:
    """Next-event scores for one state (or a stack of states)."""
    if not params.has_decoder:
        raise UsageError("model has no decoder; next-event scores are unavailable")
    states = np.asarray(states, dtype=np.float64)
    if states.shape[-1] != params.dim:
        raise UsageError(f"state dimension {states.shape[-1]} does not match model dim {params.dim}")
    z = state_to_tangent(params, states)
    return z @ params.decoder_weights.T + params.decoder_bias


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def loss_pred(params: ModelParams, traj: HiddenTrajectory) -> float:
    """Summed next-event cross-entropy along the trajectory.

    The state after event t scores event t+1, so a length-1 sequence
    has no prediction terms (returns 0 with a warning).
    """
    if traj.length < 2:
        warnings.warn("length-1 sequence has no next-event prediction terms", stacklevel=2)
        return 0.0
    logits = predict_logits(params, traj.states[1:-1])
    logp = _log_softmax(logits)
    targets = traj.sequence[1:]
    return float(-np.sum(logp[np.arange(len(targets)), targets]))


def loss_recon(params: ModelParams, traj: HiddenTrajectory) -> float:
    """How far stepping back by each event lands from the previous state.

    Evaluated on a dropout-free trajectory with the unmasked embedding
    table. Zero for unclipped Euclidean composition by construction.
    """
    if traj.masks is not None:
        raise UsageError("reconstruction loss is defined on a clean (mask-free) trajectory")
    g = params.geometry
    emb = params.embeddings[traj.sequence]
    h_prev, h_cur = traj.states[:-1], traj.states[1:]
    if g.is_hyperbolic:
        back = geo.mobius_add(h_cur, -emb, g.c)
        d = geo.poincare_distance(back, h_prev, g.c)
        return float(np.sum(d * d))
    delta = h_cur - emb - h_prev
    return float(np.sum(delta * delta))


def _consist_value(params: ModelParams, traj_a: HiddenTrajectory, traj_b: HiddenTrajectory) -> float:
    g = params.geometry
    a, b = traj_a.states[1:], traj_b.states[1:]
    if g.is_hyperbolic:
        d = geo.poincare_distance(a, b, g.c)
        return float(np.sum(d * d))
    delta = a - b
    return float(np.sum(delta * delta))


def loss_consist(params: ModelParams, seq: np.ndarray, dropout: DropoutSpec, seed2: int) -> float:
    """Squared divergence between two independently masked trajectories.

    The passes use mask seeds ``dropout.seed`` and ``seed2``; equal
    seeds (or rate 0) give identical trajectories and a zero loss.
    """
    if dropout.rate == 0.0:
        return 0.0
    traj_a = forward(params, seq, dropout)
    traj_b = forward(params, seq, DropoutSpec(dropout.rate, seed2))
    return _consist_value(params, traj_a, traj_b)


@dataclass(frozen=True)
class LossBreakdown:
    pred: float
    recon: float
    consist: float
    total: float
    lambda_recon: float = 1.0
    lambda_consist: float = 1.0

    def to_dict(self) -> dict:
        return {
            "pred": self.pred,
            "recon": self.recon,
            "consist": self.consist,
            "total": self.total,
            "lambda_recon": self.lambda_recon,
            "lambda_consist": self.lambda_consist,
        }


def _passes(params: ModelParams, seq: np.ndarray, dropout: DropoutSpec | None):
    """Forward passes feeding the combined loss.

    With dropout active: two independently masked passes (prediction
    reads the first, consistency compares both) plus a clean pass for
    reconstruction. Without: one clean pass serves prediction and
    reconstruction, and consistency vanishes.
    """
    if dropout is not None and dropout.rate > 0.0:
        pass_a = forward(params, seq, dropout)
        pass_b = forward(params, seq, DropoutSpec(dropout.rate, consistency_seed(dropout.seed)))
        clean = forward(params, seq, None)
        return pass_a, pass_b, clean
    clean = forward(params, seq, None)
    return clean, None, clean


def total_loss(
    params: ModelParams,
    seq: np.ndarray,
    lambda_recon: float = 1.0,
    lambda_consist: float = 1.0,
    dropout: DropoutSpec | None = None,
) -> LossBreakdown:
    pass_a, pass_b, clean = _passes(params, seq, dropout)
    pred = loss_pred(params, pass_a) if len(np.atleast_1d(seq)) >= 2 else 0.0
    recon = loss_recon(params, clean)
    consist = _consist_value(params, pass_a, pass_b) if pass_b is not None else 0.0
    return LossBreakdown(
        pred=pred,
        recon=recon,
        consist=consist,
        total=pred + lambda_recon * recon + lambda_consist * consist,
        lambda_recon=lambda_recon,
        lambda_consist=lambda_consist,
    )


class _GradAccumulator:
    def __init__(self, params: ModelParams):
        self.embeddings = np.zeros_like(params.embeddings)
        self.decoder_weights = (
            np.zeros_like(params.decoder_weights) if params.has_decoder else None
        )
        self.decoder_bias = np.zeros_like(params.decoder_bias) if params.has_decoder else None

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {"embeddings": self.embeddings}
        if self.decoder_weights is not None:
            out["decoder_weights"] = self.decoder_weights
            out["decoder_bias"] = self.decoder_bias
        return out


def _backward_through_trajectory(
    params: ModelParams, traj: HiddenTrajectory, g_states: np.ndarray, acc: _GradAccumulator
) -> None:
    """Push accumulated state gradients back to the embedding table.

    ``g_states[t]`` is dL/d(states[t]). Walks t = T..1 through the
    clip/projection and combination of each step, following exactly the
    branch the forward pass took.
    """
    g = params.geometry
    t_len = traj.length
    if g.is_hyperbolic:
        c = g.c
        g_inputs = np.empty_like(traj.inputs)
        for t in range(t_len - 1, -1, -1):
            gr = geo._project_to_ball_vjp(traj.raw_states[t], c, geo.DEFAULT_BALL_MARGIN, g_states[t + 1])
            gh_prev, g_inputs[t] = geo._mobius_add_vjp(traj.states[t], traj.inputs[t], c, gr)
            g_states[t] += gh_prev
        g_masked = geo._project_to_ball_vjp(traj.masked, c, geo.DEFAULT_BALL_MARGIN, g_inputs)
    else:
        clipped = g.max_norm is not None and not np.array_equal(traj.raw_states, traj.states[1:])
        if clipped:
            g_masked = np.empty_like(traj.inputs)
            for t in range(t_len - 1, -1, -1):
                gr = geo._clip_norm_vjp(traj.raw_states[t], g.max_norm, g_states[t + 1])
                g_states[t] += gr
                g_masked[t] = gr
        else:
            # Identity chain: each state's gradient flows to every
            # earlier input, i.e. a reversed cumulative sum.
            g_masked = np.cumsum(g_states[1:][::-1], axis=0)[::-1]
    if traj.masks is not None:
        g_masked = g_masked * traj.masks
    np.add.at(acc.embeddings, traj.sequence, g_masked)


def _add_pred_grads(
    params: ModelParams, traj: HiddenTrajectory, g_states: np.ndarray, acc: _GradAccumulator
) -> float:
    """Cross-entropy value plus its gradients (decoder directly, states via g_states)."""
    if traj.length < 2:
        return 0.0
    states = traj.states[1:-1]
    z = state_to_tangent(params, states)
    logits = z @ params.decoder_weights.T + params.decoder_bias
    logp = _log_softmax(logits)
    targets = traj.sequence[1:]
    rows = np.arange(len(targets))
    value = float(-np.sum(logp[rows, targets]))

    g_logits = np.exp(logp)
    g_logits[rows, targets] -= 1.0
    acc.decoder_weights += g_logits.T @ z
    acc.decoder_bias += g_logits.sum(axis=0)
    g_z = g_logits @ params.decoder_weights
    if params.geometry.is_hyperbolic:
        g_states[1:-1] += geo._log_map_origin_vjp(states, params.geometry.c, g_z)
    else:
        g_states[1:-1] += g_z
    return value


def _add_recon_grads(
    params: ModelParams,
    clean: HiddenTrajectory,
    weight: float,
    g_states: np.ndarray,
    acc: _GradAccumulator,
) -> float:
    """Reconstruction value and gradients (states via g_states, embeddings direct)."""
    g = params.geometry
    emb = params.embeddings[clean.sequence]
    h_prev, h_cur = clean.states[:-1], clean.states[1:]
    if g.is_hyperbolic:
        c = g.c
        back = geo.mobius_add(h_cur, -emb, c)
        d = geo.poincare_distance(back, h_prev, c)
        value = float(np.sum(d * d))
        if weight != 0.0:
            g_back, g_hprev = geo._poincare_dist_sq_vjp(back, h_prev, c, np.full(len(d), weight))
            g_hcur, g_negemb = geo._mobius_add_vjp(h_cur, -emb, c, g_back)
            g_states[1:] += g_hcur
            g_states[:-1] += g_hprev
            np.add.at(acc.embeddings, clean.sequence, -g_negemb)
        return value
    delta = h_cur - emb - h_prev
    value = float(np.sum(delta * delta))
    if weight != 0.0:
        gd = 2.0 * weight * delta
        g_states[1:] += gd
        g_states[:-1] -= gd
        np.add.at(acc.embeddings, clean.sequence, -gd)
    return value


def _add_consist_grads(
    params: ModelParams,
    traj_a: HiddenTrajectory,
    traj_b: HiddenTrajectory,
    weight: float,
    g_a: np.ndarray,
    g_b: np.ndarray,
) -> float:
    g = params.geometry
    a, b = traj_a.states[1:], traj_b.states[1:]
    if g.is_hyperbolic:
        d = geo.poincare_distance(a, b, g.c)
        value = float(np.sum(d * d))
        if weight != 0.0:
            ga, gb = geo._poincare_dist_sq_vjp(a, b, g.c, np.full(len(d), weight))
            g_a[1:] += ga
            g_b[1:] += gb
        return value
    delta = a - b
    value = float(np.sum(delta * delta))
    if weight != 0.0:
        gd = 2.0 * weight * delta
        g_a[1:] += gd
        g_b[1:] -= gd
    return value


def gradients(
    params: ModelParams,
    seq: np.ndarray,
    lambda_recon: float = 1.0,
    lambda_consist: float = 1.0,
    dropout: DropoutSpec | None = None,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Combined loss and its exact gradients for one sequence."""
    if not params.has_decoder:
        raise UsageError("training requires a decoder; build params with with_decoder=True")
    pass_a, pass_b, clean = _passes(params, seq, dropout)
    acc = _GradAccumulator(params)

    g_a = np.zeros_like(pass_a.states)
    pred = _add_pred_grads(params, pass_a, g_a, acc)

    if pass_b is not None:
        g_b = np.zeros_like(pass_b.states)
        g_clean = np.zeros_like(clean.states)
        consist = _add_consist_grads(params, pass_a, pass_b, lambda_consist, g_a, g_b)
        recon = _add_recon_grads(params, clean, lambda_recon, g_clean, acc)
        _backward_through_trajectory(params, pass_a, g_a, acc)
        _backward_through_trajectory(params, pass_b, g_b, acc)
        _backward_through_trajectory(params, clean, g_clean, acc)
    else:
        consist = 0.0
        recon = _add_recon_grads(params, clean, lambda_recon, g_a, acc)
        _backward_through_trajectory(params, pass_a, g_a, acc)

    losses = LossBreakdown(
        pred=pred,
        recon=recon,
        consist=consist,
        total=pred + lambda_recon * recon + lambda_consist * consist,
        lambda_recon=lambda_recon,
        lambda_consist=lambda_consist,
    )
    return losses, acc.as_dict()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: ModelParams, path: str) -> None:
    """Write params as JSON. Floats keep full precision (shortest repr)."""
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "geometry": params.geometry.to_dict(),
        "dim": params.dim,
        "vocab": list(params.vocab.names),
        "embeddings": params.embeddings.tolist(),
        "decoder_weights": None if params.decoder_weights is None else params.decoder_weights.tolist(),
        "decoder_bias": None if params.decoder_bias is None else params.decoder_bias.tolist(),
    }
    atomic_write_json(path, doc, indent=None)


def load_checkpoint(path: str) -> ModelParams:
    import json as _json

    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = _json.load(f)
    except (OSError, _json.JSONDecodeError) as e:
        raise DataFormatError(f"cannot read checkpoint {path}: {e}") from None
    if not isinstance(doc, dict):
        raise DataFormatError(f"{path}: checkpoint must be a JSON object")
    version = doc.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {version!r}")
    required = ("geometry", "dim", "vocab", "embeddings")
    missing = [k for k in required if k not in doc]
    if missing:
        raise DataFormatError(f"{path}: missing checkpoint keys: {', '.join(missing)}")
    try:
        geometry = geo.Geometry.from_dict(doc["geometry"])
        vocab = Vocabulary(doc["vocab"])
        emb = np.asarray(doc["embeddings"], dtype=np.float64)
        dec_w = doc.get("decoder_weights")
        dec_b = doc.get("decoder_bias")
        params = ModelParams(
            geometry=geometry,
            vocab=vocab,
            embeddings=emb,
            decoder_weights=None if dec_w is None else np.asarray(dec_w, dtype=np.float64),
            decoder_bias=None if dec_b is None else np.asarray(dec_b, dtype=np.float64),
        )
    except (UsageError, ValueError, TypeError) as e:
        raise DataFormatError(f"{path}: malformed checkpoint: {e}") from None
    if params.dim != int(doc["dim"]):
        raise DataFormatError(f"{path}: dim field does not match embedding shape")
    if not np.all(np.isfinite(params.embeddings)):
        raise DataFormatError(f"{path}: embeddings contain non-finite values")
    return params
