"""Reference computations that share no code with the package.

Each helper recomputes a quantity from first principles with a different
method (high-precision arithmetic, exhaustive enumeration, quadrature) so
tests can compare against it.
"""

from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np


def sample_sizes_mp(variances, costs, eps, dps: int = 60) -> list[int]:
    """N_l = ceil(2 eps^-2 sqrt(V_l / C_l) sum_i sqrt(V_i C_i)) at ``dps`` digits, floor 1."""
    with mpmath.workdps(dps):
        V = [mpmath.mpf(v) for v in variances]
        C = [mpmath.mpf(c) for c in costs]
        e = mpmath.mpf(eps)
        total = mpmath.fsum(mpmath.sqrt(v * c) for v, c in zip(V, C))
        out = []
        for v, c in zip(V, C):
            n = int(mpmath.ceil(2 / e**2 * mpmath.sqrt(v / c) * total)) if v > 0 else 0
            out.append(max(n, 1))
        return out


def levels_mp(c, alpha, s, eps, dps: int = 60) -> int:
    with mpmath.workdps(dps):
        x = mpmath.log(mpmath.sqrt(2) * mpmath.mpf(c) / mpmath.mpf(eps), mpmath.mpf(s)) / mpmath.mpf(alpha)
        # exact powers land within rounding of an integer
        r = mpmath.nint(x)
        k = int(r) if abs(x - r) < mpmath.mpf(10) ** (-dps // 2) else int(mpmath.ceil(x))
        return max(k, 0)


def serial_sgs_makespan(items, p: int) -> float:
    """Best serial-generation schedule over every task order.

    ``items`` are (duration, width).  Each task in order starts at the
    earliest instant no earlier than the previous start where ``width``
    processors are free for its whole run.  Enumerating all orders of this
    scheme reaches an optimal schedule for rigid tasks.
    """
    best = math.inf
    for order in itertools.permutations(items):
        placed = []
        last = 0.0
        span = 0.0
        for w, q in order:
            starts = sorted({last} | {e for _, e, _ in placed if e >= last})
            for t in starts:
                checks = sorted({t} | {s for s, _, _ in placed if t < s < t + w})
                if all(sum(qq for s, e, qq in placed if s <= x < e) + q <= p for x in checks):
                    placed.append((t, t + w, q))
                    last = t
                    span = max(span, t + w)
                    break
        best = min(best, span)
    return best


def exponential_kernel_eigenvalues(corr_length: float, count: int, nodes: int = 600) -> np.ndarray:
    """Nystrom eigenvalues of exp(-|x - y| / corr_length) on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    K = np.exp(-np.abs(x[:, None] - x[None, :]) / corr_length)
    sw = np.sqrt(w)
    lam = np.linalg.eigvalsh(sw[:, None] * K * sw[None, :])
    return np.sort(lam)[::-1][:count]


def replay_level_sums(model, seed: int, level: int, n: int) -> tuple[int, float, float]:
    """(count, sum Y, sum Y^2) from evaluating samples 1..n one at a time."""
    ys = []
    for i in range(1, n + 1):
        fine, coarse, _ = model.evaluate(level, i, seed)
        ys.append(fine - coarse)
    return n, math.fsum(ys), math.fsum(y * y for y in ys)


def synthetic_moments(base, c, alpha, s, noise, level: int) -> tuple[float, float]:
    """E and V of Y_l for Q_l = base - c s^(-alpha l)(1 + noise Z)."""
    if level == 0:
        return base - c, (c * noise) ** 2
    # Y_l = c (1 + noise Z) (s^(-alpha (l-1)) - s^(-alpha l))
    k = c * (s ** (-alpha * (level - 1)) - s ** (-alpha * level))
    return k, (k * noise) ** 2


def constant_coefficient_midpoint(elements: int) -> float:
    """Linear FE value at x = 1/2 for -u'' = 1 with zero ends (nodally exact)."""
    return 0.125
