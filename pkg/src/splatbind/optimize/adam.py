"""Adam over named parameter groups, with post-step projections."""

from dataclasses import dataclass

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators per group plus the step count."""

    m: dict
    v: dict
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS


def init_adam(params: dict) -> AdamState:
    return AdamState(m={k: np.zeros_like(p) for k, p in params.items()},
                     v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(state: AdamState, params: dict, grads: dict, lrs: dict,
              projections: dict = None) -> None:
    """One bias-corrected Adam step, updating the parameters in place.

    Gradients are validated for every group before any state mutates,
    so a bad gradient leaves parameters and moments untouched.  The
    arrays in ``params`` keep their identity (callers hold views).
    """
    checked = {}
    for name, p in params.items():
        if name not in grads:
            raise ValueError(f"missing gradient for group '{name}'")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match "
                             f"group '{name}' shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for group '{name}'")
        checked[name] = g

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        g = checked[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lrs[name] * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    if projections:
        for name, proj in projections.items():
            if name in params:
                proj(params[name])


def compact_state(state: AdamState, mask: np.ndarray) -> None:
    """Drop pruned rows from every accumulator (stage-1 pruning)."""
    for table in (state.m, state.v):
        for name in table:
            table[name] = table[name][mask]


def project_unit_rows(arr: np.ndarray) -> None:
    """Renormalize quaternion / 2D-rotation rows in place."""
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    arr /= np.maximum(norms, 1e-12)


def project_box(lo: float, hi: float):
    def proj(arr: np.ndarray) -> None:
        np.clip(arr, lo, hi, out=arr)
    return proj


def project_scale_cap(limits) -> callable:
    """Clamp log-scales from above; `limits` is scalar or per-row (N,)."""
    limits = np.asarray(limits, dtype=np.float64)

    def proj(arr: np.ndarray) -> None:
        cap = limits if limits.ndim == 0 else limits[:, None]
        np.minimum(arr, cap, out=arr)
    return proj
