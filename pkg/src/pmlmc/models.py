"""Sample models plugged into the runtime.

Each model maps ``(level, sample index, seed)`` to a coupled pair of
quantities of interest (fine level and the next coarser one, drawn from the
same random input) plus the time the evaluation takes.  Level 0 has no
coarse partner and reports 0 for it.

* ``PauseModel``: waits a uniformly random time; the QoI is that time.
* ``SyntheticModel``: closed-form QoI with known mean and variance per level.
* ``Elliptic1DModel``: -(kappa u')' = 1 on (0, 1) with a log-normal
  coefficient from a truncated exponential-covariance expansion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import ndtri

from .errors import InvalidArgs, SolveFailure
from .rng import sample_stream, sample_uniforms

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class SampleBatch:
    """Results for samples ``first .. first + len - 1`` of one level."""

    level: int
    first: int
    fine: np.ndarray
    coarse: np.ndarray
    duration: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.fine - self.coarse

    def __len__(self) -> int:
        return len(self.fine)


class Model:
    """Base class; subclasses implement ``evaluate_batch``.

    ``timing`` tells execute mode what to do with a reported duration:
    ``"sleep"`` means the group really waits that long, ``"measured"`` means
    the evaluation itself is the work and its wall time is what counts.
    """

    name = "model"
    timing = "sleep"

    def max_level(self) -> int | None:
        return None

    def evaluate_batch(self, level: int, first: int, last: int, seed: int) -> SampleBatch:
        raise NotImplementedError

    def evaluate(self, level: int, index: int, seed: int) -> tuple[float, float, float]:
        b = self.evaluate_batch(level, index, index, seed)
        return float(b.fine[0]), float(b.coarse[0]), float(b.duration[0])

    def check_level(self, level: int) -> None:
        top = self.max_level()
        if level < 0 or (top is not None and level > top):
            raise InvalidArgs(f"{self.name} model has no level {level}")

    def to_dict(self) -> dict:
        return {"name": self.name}


def _open_uniforms(seed: int, level: int, first: int, last: int, word: int = 0) -> np.ndarray:
    # shift off 0 so inverse-CDF transforms stay finite
    return sample_uniforms(seed, level, first, last, word) + 0.5 / 9007199254740992.0


# ---------------------------------------------------------------- pause


@dataclass(frozen=True)
class PauseModelSpec:
    mu_per_level: tuple[float, ...]
    sigma_per_level: tuple[float, ...]
    # "std": sigma is a standard deviation, range mu +- sqrt(3) sigma
    # "variance": sigma is a variance, range mu +- sqrt(3 sigma)
    sigma_reading: str = "std"

    def __post_init__(self):
        object.__setattr__(self, "mu_per_level", tuple(float(m) for m in self.mu_per_level))
        object.__setattr__(self, "sigma_per_level", tuple(float(s) for s in self.sigma_per_level))
        if len(self.mu_per_level) != len(self.sigma_per_level) or not self.mu_per_level:
            raise InvalidArgs("mu and sigma need one entry per level")
        if self.sigma_reading not in ("std", "variance"):
            raise InvalidArgs(f"unknown sigma reading {self.sigma_reading!r}")
        for mu, hw in zip(self.mu_per_level, self.half_widths):
            if not (mu > 0 and hw >= 0 and mu - hw > 0):
                raise InvalidArgs(f"durations must stay positive (mu={mu}, half width={hw})")

    @property
    def half_widths(self) -> tuple[float, ...]:
        if self.sigma_reading == "std":
            return tuple(SQRT3 * s for s in self.sigma_per_level)
        return tuple(math.sqrt(3.0 * s) for s in self.sigma_per_level)

    @classmethod
    def uniform(cls, levels: int, mu: float, sigma: float, sigma_reading: str = "std") -> "PauseModelSpec":
        """Same mean and spread on every level."""
        return cls((mu,) * levels, (sigma,) * levels, sigma_reading)


@dataclass(frozen=True)
class PauseDraw:
    qoi: float
    duration: float


def pause_sample(spec: PauseModelSpec, level: int, index: int, seed: int) -> PauseDraw:
    d = _pause_durations(spec, level, index, index, seed)[0]
    return PauseDraw(float(d), float(d))


def _pause_durations(spec: PauseModelSpec, level: int, first: int, last: int, seed: int,
                     u: np.ndarray | None = None) -> np.ndarray:
    if u is None:
        u = sample_uniforms(seed, level, first, last)
    return spec.mu_per_level[level] + spec.half_widths[level] * (2.0 * u - 1.0)


class PauseModel(Model):
    name = "pause"
    timing = "sleep"

    def __init__(self, spec: PauseModelSpec):
        self.spec = spec

    def max_level(self) -> int:
        return len(self.spec.mu_per_level) - 1

    def evaluate_batch(self, level, first, last, seed):
        self.check_level(level)
        u = sample_uniforms(seed, level, first, last)
        fine = _pause_durations(self.spec, level, first, last, seed, u)
        if level == 0:
            coarse = np.zeros_like(fine)
        else:
            # the coarse partner shares the draw but does not add waiting time
            coarse = _pause_durations(self.spec, level - 1, first, last, seed, u)
        return SampleBatch(level, first, fine, coarse, fine.copy())

    def mean_estimate(self, L: int) -> float:
        return self.spec.mu_per_level[L]

    def to_dict(self):
        return {"name": self.name, **asdict(self.spec)}


# ------------------------------------------------------------ synthetic


@dataclass(frozen=True)
class SyntheticModelSpec:
    base_mean: float = 1.0
    decay_c: float = 1.0
    decay_alpha: float = 1.0
    s: float = 2.0
    noise_scale: float = 0.5
    # evaluation time of a level-l sample: duration * s**(cost_exponent * l)
    duration: float = 1e-3
    cost_exponent: float = 0.0

    def __post_init__(self):
        vals = (self.base_mean, self.decay_c, self.decay_alpha, self.s, self.noise_scale,
                self.duration, self.cost_exponent)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgs("synthetic model parameters must be finite")
        if not (self.decay_c > 0 and self.decay_alpha > 0 and self.s > 1):
            raise InvalidArgs("need decay_c > 0, decay_alpha > 0 and s > 1")
        if self.noise_scale < 0 or not self.duration > 0:
            raise InvalidArgs("need noise_scale >= 0 and duration > 0")


def _synthetic_q(spec: SyntheticModelSpec, level: int, z: np.ndarray) -> np.ndarray:
    return spec.base_mean - spec.decay_c * spec.s ** (-spec.decay_alpha * level) * (1.0 + spec.noise_scale * z)


class SyntheticModel(Model):
    """Q_l = base - c s^(-alpha l) (1 + noise Z), one standard normal Z per sample."""

    name = "synthetic"
    timing = "sleep"

    def __init__(self, spec: SyntheticModelSpec):
        self.spec = spec

    def evaluate_batch(self, level, first, last, seed):
        self.check_level(level)
        z = ndtri(_open_uniforms(seed, level, first, last))
        fine = _synthetic_q(self.spec, level, z)
        coarse = _synthetic_q(self.spec, level - 1, z) if level > 0 else np.zeros_like(fine)
        dur = np.full(len(fine), self.spec.duration * self.spec.s ** (self.spec.cost_exponent * level))
        return SampleBatch(level, first, fine, coarse, dur)

    # closed-form moments of Y_l
    def mean_y(self, level: int) -> float:
        sp = self.spec
        if level == 0:
            return sp.base_mean - sp.decay_c
        return sp.decay_c * sp.s ** (-sp.decay_alpha * level) * (sp.s**sp.decay_alpha - 1.0)

    def var_y(self, level: int) -> float:
        sp = self.spec
        if level == 0:
            return (sp.decay_c * sp.noise_scale) ** 2
        scale = sp.decay_c * sp.s ** (-sp.decay_alpha * level) * (sp.s**sp.decay_alpha - 1.0)
        return (scale * sp.noise_scale) ** 2

    def mean_estimate(self, L: int) -> float:
        sp = self.spec
        return sp.base_mean - sp.decay_c * sp.s ** (-sp.decay_alpha * L)

    def to_dict(self):
        return {"name": self.name, **asdict(self.spec)}


# ------------------------------------------------------------ elliptic


class ExponentialKLE:
    """Karhunen-Loeve pairs of exp(-|x - y| / corr_length) on (0, 1).

    Shifting to (-1/2, 1/2) gives the classical closed form: with
    c = 1/corr_length, even modes cos(w x) solve w tan(w/2) = c and odd
    modes sin(w x) solve w + c tan(w/2) = 0; both have eigenvalue
    2c / (w^2 + c^2).
    """

    def __init__(self, corr_length: float, terms: int):
        if not corr_length > 0 or terms < 1:
            raise InvalidArgs("need corr_length > 0 and terms >= 1")
        self.corr_length = corr_length
        self.terms = terms
        c = 1.0 / corr_length
        a = 0.5
        modes = []
        k = 0
        while len(modes) < terms:
            lo, hi = k * math.pi / a, (k + 0.5) * math.pi / a
            w = brentq(lambda w: w * math.tan(w * a) - c, lo + 1e-12, hi - 1e-12, xtol=1e-14)
            modes.append((w, "even"))
            lo, hi = (k + 0.5) * math.pi / a, (k + 1) * math.pi / a
            w = brentq(lambda w: w + c * math.tan(w * a), lo + 1e-12, hi - 1e-12, xtol=1e-14)
            modes.append((w, "odd"))
            k += 1
        modes = modes[:terms]
        self.omegas = np.array([w for w, _ in modes])
        self.parity = tuple(kind for _, kind in modes)
        self.eigenvalues = 2.0 * c / (self.omegas**2 + c * c)
        norms = []
        for w, kind in modes:
            if kind == "even":
                norms.append(math.sqrt(a + math.sin(2 * w * a) / (2 * w)))
            else:
                norms.append(math.sqrt(a - math.sin(2 * w * a) / (2 * w)))
        self._norms = np.array(norms)

    def eigenfunctions(self, x: np.ndarray) -> np.ndarray:
        """Array of shape (terms, len(x)) with orthonormal modes on (0, 1)."""
        xs = np.asarray(x, dtype=float) - 0.5
        out = np.empty((self.terms, len(xs)))
        for k, (w, kind) in enumerate(zip(self.omegas, self.parity)):
            out[k] = np.cos(w * xs) if kind == "even" else np.sin(w * xs)
        return out / self._norms[:, None]

    def field(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return (np.sqrt(self.eigenvalues) * xi) @ self.eigenfunctions(x)


@dataclass(frozen=True)
class Elliptic1DSpec:
    coarse_elements: int = 16
    s: int = 2
    kle_terms: int = 32
    correlation_length: float = 0.25
    log_std: float = 0.25
    qoi: str = "midpoint"  # "midpoint" | "integral"
    # simulated seconds per element for the work model
    c_work: float = 1e-6

    def __post_init__(self):
        if self.coarse_elements < 2 or self.kle_terms < 1 or self.s < 2:
            raise InvalidArgs("need coarse_elements >= 2, kle_terms >= 1 and s >= 2")
        if self.qoi not in ("midpoint", "integral"):
            raise InvalidArgs(f"unknown qoi {self.qoi!r}")
        if not self.c_work > 0 or self.log_std < 0:
            raise InvalidArgs("need c_work > 0 and log_std >= 0")

    def elements(self, level: int) -> int:
        return self.coarse_elements * self.s**level


def solve_diffusion(kappa_mid: np.ndarray) -> np.ndarray:
    """Linear FE for -(kappa u')' = 1, u(0) = u(1) = 0.

    ``kappa_mid`` holds the coefficient at the element midpoints.  Returns
    nodal values including both boundary zeros.
    """
    n = len(kappa_mid)
    if n < 2:
        raise InvalidArgs("need at least two elements")
    if not np.all(kappa_mid > 0) or not np.all(np.isfinite(kappa_mid)):
        raise SolveFailure("diffusion coefficient must be positive and finite")
    h = 1.0 / n
    k = kappa_mid / h
    ab = np.zeros((3, n - 1))
    ab[1] = k[:-1] + k[1:]
    ab[0, 1:] = -k[1:-1]
    ab[2, :-1] = -k[1:-1]
    rhs = np.full(n - 1, h)
    u = solve_banded((1, 1), ab, rhs, check_finite=False)
    return np.concatenate(([0.0], u, [0.0]))


def _qoi(u: np.ndarray, kind: str) -> float:
    n = len(u) - 1
    if kind == "integral":
        # exact for the piecewise-linear interpolant with zero end values
        return float(u[1:-1].sum() / n)
    if n % 2 == 0:
        return float(u[n // 2])
    return float(0.5 * (u[n // 2] + u[n // 2 + 1]))


class Elliptic1DModel(Model):
    name = "elliptic1d"
    timing = "measured"

    def __init__(self, spec: Elliptic1DSpec):
        self.spec = spec

    @cached_property
    def kle(self) -> ExponentialKLE:
        return ExponentialKLE(self.spec.correlation_length, self.spec.kle_terms)

    def _modes(self, level: int) -> np.ndarray:
        cache = self.__dict__.setdefault("_mode_cache", {})
        if level not in cache:
            n = self.spec.elements(level)
            mid = (np.arange(n) + 0.5) / n
            cache[level] = np.sqrt(self.kle.eigenvalues)[:, None] * self.kle.eigenfunctions(mid)
        return cache[level]

    def solve(self, level: int, xi: np.ndarray) -> float:
        log_kappa = self.spec.log_std * (xi @ self._modes(level))
        return _qoi(solve_diffusion(np.exp(log_kappa)), self.spec.qoi)

    def work(self, level: int) -> float:
        n = self.spec.elements(level) + (self.spec.elements(level - 1) if level > 0 else 0)
        return self.spec.c_work * n

    def evaluate_batch(self, level, first, last, seed):
        self.check_level(level)
        n = last - first + 1
        fine = np.empty(n)
        coarse = np.zeros(n)
        for k in range(n):
            xi = sample_stream(seed, level, first + k).standard_normal(self.spec.kle_terms)
            fine[k] = self.solve(level, xi)
            if level > 0:
                coarse[k] = self.solve(level - 1, xi)
        return SampleBatch(level, first, fine, coarse, np.full(n, self.work(level)))

    def to_dict(self):
        return {"name": self.name, **asdict(self.spec)}


def make_model(name: str, levels: int, **params) -> Model:
    """Build a model from a name and flat parameters (as read from config)."""
    if name == "pause":
        # mu and sigma take one value for every level or a per-level list
        mus = params.pop("mu_per_level", None) or params.pop("mu", 1.0)
        sigmas = params.pop("sigma_per_level", None)
        if sigmas is None:
            sigmas = params.pop("sigma", None)
        reading = params.pop("sigma_reading", "std")
        mus = list(mus) if isinstance(mus, (list, tuple)) else [mus] * levels
        if sigmas is None:
            sigmas = [0.2 * m for m in mus]
        sigmas = list(sigmas) if isinstance(sigmas, (list, tuple)) else [sigmas] * len(mus)
        _no_extra(name, params)
        return PauseModel(PauseModelSpec(tuple(mus), tuple(sigmas), reading))
    try:
        if name == "synthetic":
            return SyntheticModel(SyntheticModelSpec(**params))
        if name == "elliptic1d":
            return Elliptic1DModel(Elliptic1DSpec(**params))
    except TypeError as exc:
        raise InvalidArgs(f"bad {name} parameters: {exc}") from None
    raise InvalidArgs(f"unknown model {name!r}")


def _no_extra(name: str, params: dict) -> None:
    if params:
        raise InvalidArgs(f"unknown {name} parameters: {', '.join(sorted(params))}")
