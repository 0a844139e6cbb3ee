"""Shared test utilities: tiny models, ball samplers, finite-difference gradients."""

import numpy as np

from event2vec import Geometry, ModelParams, Vocabulary, project_to_ball, total_loss

PARAM_ARRAYS = ("embeddings", "decoder_weights", "decoder_bias")


def tiny_params(seed: int, geometry: Geometry, vocab_size: int = 6, dim: int = 4,
                scale: float = 0.1) -> ModelParams:
    rng = np.random.default_rng(seed)
    vocab = Vocabulary([f"e{i}" for i in range(vocab_size)])
    emb = rng.uniform(-scale, scale, size=(vocab_size, dim))
    if geometry.is_hyperbolic:
        emb = project_to_ball(emb, geometry.c)
    dec_w = rng.normal(0.0, 0.3, size=(vocab_size, dim))
    dec_b = rng.normal(0.0, 0.1, size=vocab_size)
    return ModelParams(geometry, vocab, emb, dec_w, dec_b)


def fd_total_loss_grads(params, seq, lambda_recon=1.0, lambda_consist=1.0,
                        dropout=None, eps=1e-5):
    """Central-difference gradient of total_loss w.r.t. every parameter array."""
    out = {}
    for name in PARAM_ARRAYS:
        arr = getattr(params, name)
        grad = np.zeros_like(arr)
        flat, gf = arr.ravel(), grad.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = total_loss(params, seq, lambda_recon, lambda_consist, dropout).total
            flat[i] = keep - eps
            lo = total_loss(params, seq, lambda_recon, lambda_consist, dropout).total
            flat[i] = keep
            gf[i] = (hi - lo) / (2.0 * eps)
        out[name] = grad
    return out


def max_rel_err(analytic: dict, numeric: dict, floor: float = 1e-4) -> float:
    """Worst elementwise relative error, with a floor so near-zero entries compare sanely."""
    worst = 0.0
    for key, num in numeric.items():
        an = analytic[key]
        denom = np.maximum(np.maximum(np.abs(an), np.abs(num)), floor)
        worst = max(worst, float((np.abs(an - num) / denom).max()))
    return worst


def ball_points(rng: np.random.Generator, n: int, dim: int, c: float,
                max_frac: float = 0.85) -> np.ndarray:
    """Random directions with radii up to max_frac of the ball radius."""
    v = rng.normal(size=(n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    radii = rng.uniform(0.0, max_frac, size=(n, 1)) / np.sqrt(c)
    return v * radii
