"""Parameters and closed-form constants for the radial Neumann problem

    -Δ_p u + u^{p-1} = u^{q-1}  in the unit ball B ⊂ R^N,  ∂u/∂ν = 0,

with 1 < p < q. Every other module takes a validated :class:`ProblemParams`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """Raised when exponents or dimension fall outside the admissible domain."""


def _check_pq(p: float, q: float) -> None:
    if not (math.isfinite(p) and math.isfinite(q)):
        raise ParameterError(f"exponents must be finite, got p={p}, q={q}")
    if p <= 1:
        raise ParameterError(f"need p > 1, got p={p}")
    if q <= p:
        raise ParameterError(f"need q > p, got p={p}, q={q}")


def sobolev_critical(p: float, N: int) -> float:
    """Critical Sobolev exponent ``Np/(N-p)``, or ``inf`` when ``p >= N``."""
    if not p > 1:
        raise ParameterError(f"need p > 1, got p={p}")
    if int(N) != N or N < 1:
        raise ParameterError(f"need integer N >= 1, got N={N}")
    if p >= N:
        return math.inf
    return N * p / (N - p)


def s0(p: float, q: float) -> float:
    """Truncation level ``(q/p)^(1/(q-p)) + 1`` of the modified nonlinearity."""
    _check_pq(p, q)
    return (q / p) ** (1.0 / (q - p)) + 1.0


def apriori_bounds(p: float, q: float) -> tuple[float, float]:
    """Sup bounds on ``u`` and ``u'`` for nondecreasing radial solutions.

    Returns:
        ``(u_max, du_max)`` with ``u_max = (q/p)^(1/(q-p))`` and
        ``du_max = ((q-p)/(q(p-1)))^(1/p)``.
    """
    _check_pq(p, q)
    u_max = (q / p) ** (1.0 / (q - p))
    du_max = ((q - p) / (q * (p - 1.0))) ** (1.0 / p)
    return u_max, du_max


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N; 2 for N=1 (two endpoints)."""
    if int(N) != N or N < 1:
        raise ParameterError(f"need integer N >= 1, got N={N}")
    if N == 1:
        return 2.0
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class DerivedConstants:
    s0: float
    m_star: float
    u_max: float
    du_max: float
    ell: float


@dataclass(frozen=True)
class ProblemParams:
    """Exponents ``p`` (operator) and ``q`` (nonlinearity) and dimension ``N``."""

    p: float
    q: float
    N: int = 1
    omega: float = field(init=False, repr=False)
    ball_volume: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        _check_pq(float(self.p), float(self.q))
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"need integer N >= 1, got N={self.N}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "N", int(self.N))
        omega = sphere_measure(self.N)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "ball_volume", omega / self.N)

    @property
    def derived(self) -> DerivedConstants:
        m_star = sobolev_critical(self.p, self.N)
        # any ell in (p, m_star) works below s0; fix one for reproducibility
        ell = self.p + 1.0 if math.isinf(m_star) else 0.5 * (self.p + m_star)
        u_max, du_max = apriori_bounds(self.p, self.q)
        return DerivedConstants(
            s0=u_max + 1.0, m_star=m_star, u_max=u_max, du_max=du_max, ell=ell
        )

    def with_p(self, p: float) -> "ProblemParams":
        return ProblemParams(p, self.q, self.N)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "N": self.N}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemParams":
        try:
            return cls(data["p"], data["q"], data.get("N", 1))
        except KeyError as exc:
            raise ParameterError(f"missing field {exc} in {data!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "ProblemParams":
        return cls.from_dict(json.loads(text))
