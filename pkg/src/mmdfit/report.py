"""Text summaries and JSON artifacts for fit results."""
from __future__ import annotations

import json

import numpy as np

from .models import get_family
from .regression import get_reg_family

TRACE_LIMIT = 512

_ALGO = {
    "exact": "exact enumeration (exact)",
    "GD": "gradient descent (GD)",
    "SGD": "stochastic gradient descent (SGD)",
}


def _fmt(v) -> str:
    if v is None:
        return "--"
    arr = np.asarray(v)
    if arr.ndim == 0:
        return format(float(arr), ".6g")
    if arr.ndim == 1:
        return "[" + ", ".join(format(float(t), ".6g") for t in arr) + "]"
    return "[" + "; ".join(
        ", ".join(format(float(t), ".6g") for t in row) for row in arr
    ) + "]"


def _plain(obj):
    """Recursively convert numpy containers to plain JSON-serializable types."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def render_json(payload: dict) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"


def thin_trace(trace, theta_trace, limit: int = TRACE_LIMIT) -> list:
    """Iteration records (index, objective, theta), subsampled to the limit."""
    if theta_trace is None and trace is None:
        return []
    if theta_trace is None:
        n = len(trace)
        offset = 0
        theta_trace = [None] * n
    else:
        n = len(theta_trace)
        trace = [] if trace is None else trace
        offset = n - len(trace)  # leading iterates without an objective value
    idx = list(range(0, n, max(1, -(-n // limit))))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    out = []
    for i in idx:
        obj = float(trace[i - offset]) if i >= offset and len(trace) else None
        th = theta_trace[i]
        out.append({
            "iteration": i,
            "objective": obj,
            "theta": None if th is None else np.asarray(th).tolist(),
        })
    return out


# ---------------------------------------------------------------------------
# parametric fits
# ---------------------------------------------------------------------------

def summary_est(result) -> str:
    family = get_family(result.model_id)
    final = {"par1": result.par1, "par2": result.par2}
    lines = [
        f"Model: {result.model_id}",
        f"Algorithm: {_ALGO[result.method]}",
        f"Kernel: {result.kernel.family}, bandwidth {_fmt(result.kernel.bandwidth)}",
    ]
    for slot in family.slots:
        if slot.free:
            lines.append(
                f"{slot.name}: {slot.label} -- initialized at "
                f"{_fmt(result.init.get(slot.name))}; estimated value "
                f"{_fmt(final[slot.name])}"
            )
        else:
            lines.append(
                f"{slot.name}: {slot.label} -- fixed by user at {_fmt(final[slot.name])}"
            )
    lines.append(f"Discrepancy: {_fmt(result.mmd)} (squared {_fmt(result.mmd2)})")
    if result.method != "exact":
        state = "converged" if result.converged else "stopped"
        lines.append(f"Iterations: {result.n_iter} ({state})")
    for w in result.warnings:
        lines.append(f"Warning: {w}")
    return "\n".join(lines) + "\n"


def artifact_est(result, runtime_ms: float) -> dict:
    return {
        "model": result.model_id,
        "estimator_kind": None,
        "method": result.method,
        "kernels": {"kernel": result.kernel.family},
        "bandwidths": {"bdwth": float(result.kernel.bandwidth)},
        "estimates": result.estimates(),
        "aux": None,
        "trace": thin_trace(result.trace, result.theta_trace),
        "warnings": list(result.warnings),
        "seed": result.seed,
        "runtime_ms": float(runtime_ms),
    }


# ---------------------------------------------------------------------------
# regression fits
# ---------------------------------------------------------------------------

def _estimator_line(result) -> str:
    if result.estimator_kind == "theta_tilde":
        return "Estimator: theta tilde (bdwth.x=0)"
    return f"Estimator: theta hat (bdwth.x={_fmt(result.kernel_x.bandwidth)})"


def summary_reg(result) -> str:
    fam = get_reg_family(result.model_id)
    lines = [
        f"Model: {result.model_id} (regression)",
        _estimator_line(result),
        f"Algorithm: {_ALGO[result.method]}",
        f"Kernel on y: {result.kernel_y.family}, bandwidth {_fmt(result.kernel_y.bandwidth)}",
    ]
    if result.kernel_x is not None:
        lines.append(
            f"Kernel on x: {result.kernel_x.family}, "
            f"bandwidth {_fmt(result.kernel_x.bandwidth)}"
        )
    lines.append("Coefficients:")
    width = max(len(n) for n in result.feature_names)
    for name, value in zip(result.feature_names, result.coefficients):
        lines.append(f"  {name:<{width}}  {_fmt(value)}")
    if result.aux_label is not None:
        if fam.aux_free:
            lines.append(f"{result.aux_label}: estimated value {_fmt(result.aux)}")
        else:
            lines.append(f"{result.aux_label}: fixed by user at {_fmt(result.aux)}")
    if result.estimator_kind == "theta_tilde":
        kind = "mean squared discrepancy" if result.squared else "mean discrepancy"
    else:
        kind = "discrepancy"
    lines.append(f"Objective: {kind} {_fmt(result.value)}")
    state = "converged" if result.converged else "stopped"
    lines.append(f"Iterations: {result.n_iter} ({state})")
    for w in result.warnings:
        lines.append(f"Warning: {w}")
    return "\n".join(lines) + "\n"


def artifact_reg(result, runtime_ms: float) -> dict:
    fam = get_reg_family(result.model_id)
    if result.aux_label is None:
        aux = None
    else:
        aux = {
            "label": result.aux_label,
            "value": float(result.aux),
            "estimated": bool(fam.aux_free),
        }
    return {
        "model": result.model_id,
        "estimator_kind": result.estimator_kind,
        "method": result.method,
        "kernels": {
            "kernel.x": None if result.kernel_x is None else result.kernel_x.family,
            "kernel.y": result.kernel_y.family,
        },
        "bandwidths": {
            "bdwth.x": 0.0 if result.kernel_x is None else float(result.kernel_x.bandwidth),
            "bdwth.y": float(result.kernel_y.bandwidth),
        },
        "estimates": result.coef_dict(),
        "aux": aux,
        "trace": thin_trace(result.trace, result.theta_trace),
        "warnings": list(result.warnings),
        "seed": result.seed,
        "runtime_ms": float(runtime_ms),
    }
