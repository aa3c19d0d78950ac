"""
Matrix-free GMRES on flattened fields.

The d-bar operators conjugate their argument, which makes them linear only
over the reals.  :func:`gmres_solve` therefore runs either over the complex
numbers (for operators that are genuinely complex-linear) or over
``R^{2n}`` with real and imaginary parts stacked.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np

Operator = Callable[[np.ndarray], np.ndarray]


class NonFiniteError(FloatingPointError):
    """The operator returned NaN or Inf."""

    def __init__(self, iteration: int):
        super().__init__(f"operator produced a non-finite vector at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class GmresConfig:
    tol: float = 1e-14
    max_iters: int = 200
    restart: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be positive or None")


@dataclass
class GmresReport:
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)
    converged: bool = False
    breakdown: bool = False

    def write_csv(self, path: os.PathLike | str, header: Optional[str] = None) -> None:
        """Residual history with columns ``iter, resid``."""
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["iter", "resid"])
            for i, r in enumerate(self.history):
                w.writerow([i, repr(float(r))])


def _realify(apply_A: Operator, n: int) -> Operator:
    def op(v: np.ndarray) -> np.ndarray:
        y = apply_A(v[:n] + 1j * v[n:])
        return np.concatenate([y.real, y.imag])

    return op


def _arnoldi_cycle(
    op: Operator,
    x0: np.ndarray,
    b: np.ndarray,
    bnorm: float,
    tol: float,
    m: int,
    history: List[float],
    it0: int,
) -> Tuple[np.ndarray, int, bool]:
    """One GMRES cycle of at most ``m`` steps; returns (x, steps, breakdown)."""
    dtype = np.result_type(b, x0, np.float64)
    r = b - op(x0) if np.any(x0) else b.copy()
    if not np.all(np.isfinite(r)):
        raise NonFiniteError(it0)
    beta = np.linalg.norm(r)
    if beta <= tol * bnorm:
        return x0, 0, False
    V = np.empty((min(m, 32) + 1, b.size), dtype=dtype)
    H = np.zeros((m + 1, m), dtype=dtype)
    cs = np.zeros(m, dtype=dtype)
    sn = np.zeros(m, dtype=dtype)
    g = np.zeros(m + 1, dtype=dtype)
    g[0] = beta
    V[0] = r / beta
    steps = 0
    breakdown = False
    for j in range(m):
        w = op(V[j])
        if not np.all(np.isfinite(w)):
            raise NonFiniteError(it0 + j + 1)
        # Classical Gram-Schmidt applied twice, which is as stable as modified
        # Gram-Schmidt and vectorises.
        Vj = V[: j + 1]
        for _ in range(2):
            hcol = Vj.conj() @ w
            H[: j + 1, j] += hcol
            w = w - hcol @ Vj
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        for i in range(j):
            tmp = np.conj(cs[i]) * H[i, j] + np.conj(sn[i]) * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = tmp
        a, bb = H[j, j], H[j + 1, j]
        rho = np.hypot(abs(a), abs(bb))
        if rho == 0.0:
            breakdown = True
            steps = j
            break
        cs[j] = a / rho
        sn[j] = bb / rho
        H[j, j] = rho
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = np.conj(cs[j]) * g[j]
        steps = j + 1
        history.append(abs(g[j + 1]) / bnorm)
        if hnext <= 1e-300 * max(1.0, beta):
            breakdown = True
            break
        if j + 1 >= V.shape[0]:
            V = np.concatenate([V, np.empty((min(m + 1, 2 * V.shape[0]) - V.shape[0], b.size), dtype=dtype)])
        V[j + 1] = w / hnext
        if abs(g[j + 1]) <= tol * bnorm:
            break
    if steps == 0:
        return x0, 0, breakdown
    y = np.linalg.solve(np.triu(H[:steps, :steps]), g[:steps])
    return x0 + y @ V[:steps], steps, breakdown


def gmres_solve(
    apply_A: Operator,
    b: np.ndarray,
    cfg: GmresConfig = GmresConfig(),
    *,
    field: Literal["complex", "real"] = "real",
    x0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, GmresReport]:
    """
    Solve ``apply_A(x) = b``.

    Parameters
    ----------
    apply_A : callable
        Maps a complex vector to a complex vector of the same length.
    field : {"real", "complex"}
        ``"real"`` treats ``apply_A`` as a real-linear map on stacked real and
        imaginary parts, which is correct for operators involving complex
        conjugation.  ``"complex"`` assumes complex linearity.

    Returns
    -------
    x, report
        On failure to reach ``cfg.tol`` the best iterate is returned with
        ``report.converged = False``.
    """
    b = np.asarray(b, dtype=complex).ravel()
    n = b.size
    if not np.all(np.isfinite(b)):
        raise NonFiniteError(0)
    if field == "real":
        op = _realify(apply_A, n)
        rhs = np.concatenate([b.real, b.imag])
        x = np.zeros(2 * n) if x0 is None else np.concatenate([np.real(x0).ravel(), np.imag(x0).ravel()])
    elif field == "complex":
        op = apply_A
        rhs = b
        x = np.zeros(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).ravel().copy()
    else:
        raise ValueError(f"field must be 'real' or 'complex', got {field!r}")

    bnorm = float(np.linalg.norm(rhs))
    history: List[float] = []
    if bnorm == 0.0:
        out = np.zeros(n, dtype=complex)
        return out, GmresReport(0, 0.0, [0.0], True, False)

    history.append(float(np.linalg.norm(rhs - op(x)) / bnorm) if np.any(x) else 1.0)
    total = 0
    breakdown = False
    resid = history[0]
    prev = np.inf
    while total < cfg.max_iters:
        m = cfg.max_iters - total if cfg.restart is None else min(cfg.restart, cfg.max_iters - total)
        x, steps, breakdown = _arnoldi_cycle(op, x, rhs, bnorm, cfg.tol, m, history, total)
        total += steps
        r = rhs - op(x)
        if not np.all(np.isfinite(r)):
            raise NonFiniteError(total)
        resid = float(np.linalg.norm(r) / bnorm)
        if resid <= cfg.tol or breakdown or steps == 0:
            break
        # Restarting only helps while the true residual keeps dropping.
        if resid > 0.5 * prev:
            break
        prev = resid
    if field == "real":
        x = x[:n] + 1j * x[n:]
    return x, GmresReport(total, resid, history, resid <= cfg.tol, breakdown)


__all__ = ["GmresConfig", "GmresReport", "NonFiniteError", "gmres_solve"]
