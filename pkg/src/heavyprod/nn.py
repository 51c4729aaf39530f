"""Two-layer shifted-ReLU network whose forward pass only touches active neurons.

With sigma_tau(z) = max(z, tau) every output splits as

    f(x) = tau * sum_r a_r + sum_{r : <w_r, x> >= tau} a_r * (<w_r, x> - tau)

so only the (neuron, input) pairs clearing tau matter. With tau = rho d those
are exactly the heavy pairs between the weight rows and the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .detector import DetectionReport, RngBits, detect_sets
from .instance import correlated_bits
from .params import Params, as_fraction
from .vectors import inner_products, nbytes_for, pack_rows

FLOAT_RTOL = 1e-9


@dataclass(frozen=True)
class TwoLayerNet:
    weights: np.ndarray  # (m, ceil(d/8)) packed hidden rows
    d: int
    out: tuple  # Fraction per hidden unit
    tau_act: Fraction

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[1] != nbytes_for(self.d):
            raise ValueError(f"weights must be packed rows of dimension {self.d}")
        if len(self.out) != self.weights.shape[0]:
            raise ValueError("need one output weight per hidden unit")
        object.__setattr__(self, "out", tuple(Fraction(a) for a in self.out))
        object.__setattr__(self, "tau_act", as_fraction(self.tau_act))
        if not 0 < self.tau_act <= self.d:
            raise ValueError(f"tau_act must lie in (0, {self.d}]")

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def floor(self) -> Fraction:
        """Output for an input that activates no neuron."""
        return self.tau_act * sum(self.out, Fraction(0))


def _check_inputs(net: TwoLayerNet, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != nbytes_for(net.d):
        raise ValueError(f"inputs must be packed rows of dimension {net.d}")


def forward_dense(net: TwoLayerNet, X: np.ndarray) -> list:
    """Exact f(x) for every input row, from all m * n inner products."""
    _check_inputs(net, X)
    ips = inner_products(net.weights, X, net.d)
    tau = net.tau_act
    return [
        sum((a * max(Fraction(int(z)), tau) for a, z in zip(net.out, ips[:, j])), Fraction(0))
        for j in range(X.shape[0])
    ]


def outputs_from_pairs(net: TwoLayerNet, n_inputs: int, pairs: Sequence[tuple]) -> list:
    """Apply the decomposition to a list of (neuron, input, <w, x>) triples."""
    tau = net.tau_act
    outputs = [net.floor] * n_inputs
    for r, j, ip in pairs:
        if ip >= tau:
            outputs[j] += net.out[r] * (ip - tau)
    return outputs


@dataclass
class SparseForward:
    outputs: list
    report: DetectionReport
    dense: Optional[list] = None
    mismatches: list = field(default_factory=list)

    @property
    def verified(self) -> Optional[bool]:
        return None if self.dense is None else not self.mismatches

    @property
    def max_deviation(self) -> Optional[Fraction]:
        if self.dense is None:
            return None
        return max((abs(s - t) for s, t in zip(self.outputs, self.dense)), default=Fraction(0))

    def as_floats(self) -> list:
        return [float(x) for x in self.outputs]


def forward_sparse(
    net: TwoLayerNet, X: np.ndarray, p: Params, seed: int = 0, verify: bool = False, **options
) -> SparseForward:
    """Outputs from detected heavy pairs only.

    Exact whenever the detector recovers every activated pair. Missed pairs
    are not patched up; ``verify`` runs the dense pass and lists the inputs
    that disagree.
    """
    _check_inputs(net, X)
    if p.d != net.d:
        raise ValueError(f"params derived for d={p.d}, network has d={net.d}")
    if p.rho * p.d != net.tau_act:
        raise ValueError("params threshold rho*d must equal the activation threshold")
    report = detect_sets(net.weights, X, net.d, p, RngBits(seed), **options)
    outputs = outputs_from_pairs(net, X.shape[0], report.found)
    result = SparseForward(outputs, report)
    if verify:
        result.dense = forward_dense(net, X)
        result.mismatches = [j for j, (s, t) in enumerate(zip(outputs, result.dense)) if s != t]
    return result


def forward_sparse_float(net: TwoLayerNet, X: np.ndarray, p: Params, seed: int = 0, **options) -> list:
    """Float outputs; with ``verify`` the dense check uses a relative tolerance."""
    verify = options.pop("verify", False)
    res = forward_sparse(net, X, p, seed, **options)
    out = res.as_floats()
    if verify:
        dense = [float(x) for x in forward_dense(net, X)]
        bad = [j for j, (s, t) in enumerate(zip(out, dense)) if not math.isclose(s, t, rel_tol=FLOAT_RTOL)]
        if bad:
            raise AssertionError(f"sparse and dense outputs differ at inputs {bad[:10]}")
    return out


def planted_net(
    m: int,
    n: int,
    d: int,
    k: int,
    rho,
    match_prob: float = 0.96,
    seed: int = 0,
    out_denominator: int = 16,
):
    """Random sign network plus inputs, with k inputs correlated to k neurons.

    Output weights are random rationals with the given denominator. Returns
    (net, X, truth) where truth lists the planted (neuron, input) pairs.
    """
    if k > min(m, n):
        raise ValueError(f"cannot plant {k} pairs with m={m}, n={n}")
    rng = np.random.default_rng(seed)
    w_bits = rng.integers(0, 2, (m, d), dtype=np.uint8).astype(bool)
    x_bits = rng.integers(0, 2, (n, d), dtype=np.uint8).astype(bool)
    neurons = np.sort(rng.choice(m, k, replace=False))
    inputs = rng.choice(n, k, replace=False)
    for r, j in zip(neurons, inputs):
        x_bits[j] = correlated_bits(w_bits[r], match_prob, rng)
    numer = rng.integers(-4 * out_denominator, 4 * out_denominator + 1, m)
    out = tuple(Fraction(int(a), out_denominator) for a in numer)
    net = TwoLayerNet(pack_rows(w_bits), d, out, as_fraction(rho) * d)
    truth = [(int(r), int(j)) for r, j in zip(neurons, inputs)]
    return net, pack_rows(x_bits), truth
