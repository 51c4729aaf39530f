"""Algorithm constants derived from (n, d, rho).

All threshold arithmetic is exact: rho is held as a Fraction, the flagging
test is an integer comparison and ``r`` is found by exact rational powers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

TAU_SQ = 10
DEFAULT_MEMORY_BUDGET = 3 * 2**30
EMPIRICAL_FAILURE_BUDGET = 0.01


class InfeasibleParams(ValueError):
    """Raised when the requested parameters cannot run (no gap, or too big)."""


def as_fraction(rho) -> Fraction:
    if isinstance(rho, Fraction):
        return rho
    if isinstance(rho, str):
        return Fraction(rho)
    return Fraction(rho).limit_denominator(10**9)


def threshold_for(rho, d: int) -> int:
    """Integer verification threshold ceil(rho * d)."""
    return math.ceil(as_fraction(rho) * d)


def subset_count(d: int, max_size: int) -> int:
    return sum(math.comb(d, i) for i in range(min(max_size, d) + 1))


def _group_count(n: int) -> int:
    # smallest c with c^3 >= n^2, i.e. ceil(n^(2/3)), rounded up to a power of two
    c = max(1, round(n ** (2 / 3)))
    while c**3 < n * n:
        c += 1
    while c > 1 and (c - 1) ** 3 >= n * n:
        c -= 1
    return 1 << (c - 1).bit_length()


def _exponent(w: Fraction, n: int) -> int:
    # smallest r >= 1 with w^r >= sqrt(10) * n^(1/3)  <=>  w^(6r) >= 1000 n^2
    target = 1000 * n * n
    r = max(1, math.ceil(math.log(math.sqrt(TAU_SQ) * n ** (1 / 3)) / math.log(w)) - 1)
    while w ** (6 * r) < target:
        r += 1
    while r > 1 and w ** (6 * (r - 1)) >= target:
        r -= 1
    return r


def theory_v(n: int, d: int) -> int:
    """Smallest integer v with 2 exp(-v^2 / (2d)) <= n^-13."""
    v = math.ceil(math.sqrt(2 * d * (13 * math.log(n) + math.log(2))))
    while v > 0 and 2 * math.exp(-((v - 1) ** 2) / (2 * d)) <= n**-13:
        v -= 1
    while 2 * math.exp(-(v**2) / (2 * d)) > n**-13:
        v += 1
    return v


def empirical_v(n: int, d: int, failure: float = EMPIRICAL_FAILURE_BUDGET) -> int:
    return math.ceil(math.sqrt(2 * d * math.log(2 * n * n / failure)))


@dataclass(frozen=True)
class Params:
    n: int
    d: int
    rho: Fraction
    v: int
    w: Fraction
    r: int
    t: int
    u: int
    h: int
    g: int
    reps: int
    mode: str = "empirical"
    tau_sq: int = TAU_SQ
    theta_cmp: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "theta_cmp", (4 * self.tau_sq, self.g**2 * self.v ** (2 * self.r)))

    @property
    def threshold(self) -> int:
        return threshold_for(self.rho, self.d)

    @property
    def half_r(self) -> int:
        return (self.r + 1) // 2

    @property
    def theta(self) -> float:
        return math.sqrt(self.tau_sq) * self.g * float(self.v) ** self.r / 3

    @property
    def flag_cutoff(self) -> int:
        """Smallest non-negative c with 9 c^2 >= 40 g^2 v^(2r)."""
        lhs, rhs = self.theta_cmp
        target = lhs * rhs
        c = math.isqrt(target // 9)
        while 9 * c * c < target:
            c += 1
        return c

    @property
    def t_effective(self) -> int:
        """Subsets whose multilinear coefficient can be non-zero (size parity of r)."""
        return sum(math.comb(self.d, m) for m in range(self.r % 2, min(self.r, self.d) + 1, 2))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rho"] = str(self.rho)
        out["w"] = str(self.w)
        out["theta_cmp"] = [str(x) for x in self.theta_cmp]
        out["threshold"] = self.threshold
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Params":
        kw = {k: data[k] for k in ("n", "d", "v", "r", "t", "u", "h", "g", "reps", "mode", "tau_sq")}
        return cls(rho=Fraction(data["rho"]), w=Fraction(data["w"]), **kw)


def flag_threshold_check(c: int, p: Params) -> bool:
    """True iff |c| >= 2 theta, evaluated as 9 c^2 >= 40 g^2 v^(2r)."""
    lhs, rhs = p.theta_cmp
    c = int(c)
    return 9 * c * c >= lhs * rhs


def memory_estimate(n: int, h: int, t: int) -> int:
    # float64 moment matrices for both sides plus int8 subset-product tables
    return 2 * h * t * 8 + 2 * n * t


def derive(
    n: int,
    d: int,
    rho,
    mode: str = "empirical",
    v: Optional[int] = None,
    w=None,
    reps: Optional[int] = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> Params:
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    if d < 1:
        raise ValueError("d must be positive")
    rho_f = as_fraction(rho)
    if not 0 < rho_f <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if mode not in ("theory", "empirical"):
        raise ValueError(f"unknown mode {mode!r}")

    if v is None and w is not None:
        v = math.floor(rho_f * d / as_fraction(w))
    if v is None:
        v = theory_v(n, d) if mode == "theory" else empirical_v(n, d)
    v = int(v)
    if v < 1:
        raise InfeasibleParams(f"v must be positive, got {v}")
    w_f = rho_f * d / v
    if w_f <= 1:
        raise InfeasibleParams(
            f"no amplification gap: v={v} >= rho*d={float(rho_f * d):g} (w={float(w_f):.4g})"
        )

    r = _exponent(w_f, n)
    t = subset_count(d, r)
    u = subset_count(d, (r + 1) // 2)
    h = _group_count(n)
    g = -(-n // h)
    est = memory_estimate(n, h, t)
    if est > memory_budget:
        raise InfeasibleParams(
            f"infeasible subset count: r={r}, t={t}, u={u}, estimated {est} bytes "
            f"exceeds budget {memory_budget}"
        )
    if reps is None:
        reps = math.ceil(10 * math.log2(n))
    return Params(n=n, d=d, rho=rho_f, v=v, w=w_f, r=r, t=t, u=u, h=h, g=g, reps=int(reps), mode=mode)


def validate_report(p: Params) -> dict:
    """Surface the probabilistic premises behind the parameters as numbers.

    Violated premises are reported as warnings; at desk scale most runs
    violate the union bound and that is expected.
    """
    tail = 2 * math.exp(-(p.v**2) / (2 * p.d))
    union = p.n * p.n * tail
    sigma = p.g * p.v**p.r
    warnings = []
    if union > 1:
        warnings.append(f"union bound over n^2 pairs is {union:.3g} > 1")
    if tail > p.n**-13:
        warnings.append("per-pair tail exceeds n^-13")
    return {
        "tail_bound": tail,
        "union_bound": union,
        "sigma_bound": sigma,
        "theta": p.theta,
        "two_theta_cutoff": p.flag_cutoff,
        "t": p.t,
        "u": p.u,
        "t_effective": p.t_effective,
        "h": p.h,
        "g": p.g,
        "memory_bytes": memory_estimate(p.n, p.h, p.t),
        "score_flops_per_rep": 2 * p.h * p.h * p.t_effective,
        "moment_ops_per_rep": 2 * p.n * p.t_effective,
        "warnings": warnings,
    }
