"""Joint count tables for mixtures of Fock pairs."""

from __future__ import annotations

import enum

import numpy as np

from ..detectors import DetectorArray, build_dilation, mean_count, scale_array
from ..errors import ParameterError
from ..number_stats import DEFAULT_TAIL_TOLERANCE, NumberDistribution, binomial_thinning
from .cache import KernelCache
from .classical import classical_joint
from .network import DEFAULT_BUDGET, fock_kernels
from .tables import Backend, CountTable, JointCountDistribution, total_variation


class BackendChoice(str, enum.Enum):
    AUTO = "Auto"
    NETWORK = "Network"
    COHERENT_QUADRATURE = "CoherentQuadrature"


def _choice(backend) -> BackendChoice:
    if isinstance(backend, BackendChoice):
        return backend
    key = str(backend).replace("_", "").replace("-", "").lower()
    for c in BackendChoice:
        if c.value.lower() == key:
            return c
    raise ParameterError(f"unknown backend {backend!r}; expected Auto, Network or CoherentQuadrature")


def has_classical_p(dist: NumberDistribution) -> bool:
    return dist.p_function is not None and dist.p_function.is_classical


def select_backend(source_a, source_b, backend="Auto") -> Backend:
    choice = _choice(backend)
    if choice is BackendChoice.AUTO:
        if has_classical_p(source_a) and has_classical_p(source_b):
            return Backend.COHERENT_QUADRATURE
        return Backend.NETWORK
    return Backend(choice.value)


class _Neumaier:
    """Elementwise compensated accumulator over sub-boxes of a dense array."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, term):
        sl = tuple(slice(0, n) for n in term.shape)
        s = self.s[sl]
        t = s + term
        self.c[sl] += np.where(np.abs(s) >= np.abs(term), (s - t) + term, (term - t) + s)
        self.s[sl] = t

    def result(self):
        return self.s + self.c


def network_mixture(
    source_a: NumberDistribution,
    source_b: NumberDistribution,
    array: DetectorArray,
    budget: int = DEFAULT_BUDGET,
    cache: KernelCache | None = None,
    threads: int = 1,
    impl: str | None = None,
) -> CountTable:
    """``sum p_a(N_a) p_b(N_b) P(n | N_a, N_b)`` with exact Fock kernels."""
    net = build_dilation(array)
    na = source_a.support[source_a.pmf > 0]
    nb = source_b.support[source_b.pmf > 0]
    kernels = fock_kernels(na, nb, net, budget=budget, cache=cache, threads=threads, impl=impl)
    M = len(array)
    acc = _Neumaier((int(na[-1] + nb[-1]) + 1,) * M)
    # fixed order, so results do not depend on thread scheduling
    for a in na:
        pa = source_a(int(a))
        for b in nb:
            acc.add(pa * source_b(int(b)) * kernels[(int(a), int(b))])
    desc = f"{source_a.describe()} x {source_b.describe()}"
    return CountTable(acc.result(), (0,) * M, Backend.NETWORK, desc)


def mixture_joint(
    source_a: NumberDistribution,
    source_b: NumberDistribution,
    array: DetectorArray,
    backend="Auto",
    *,
    budget: int = DEFAULT_BUDGET,
    cache: KernelCache | None = None,
    threads: int = 1,
    impl: str | None = None,
    phase_nodes: int = 256,
    radial_nodes: int = 48,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    given: tuple[int, int] | None = None,
) -> JointCountDistribution:
    """Joint count distribution of two independent sources.

    ``backend="Auto"`` uses the P-function quadrature when both sources
    have a nonnegative P-function and exact Fock kernels otherwise.
    ``given=(m, count)`` (0-based ``m``) restricts the result to one slice,
    which the quadrature computes directly.
    """
    which = select_backend(source_a, source_b, backend)
    if which is Backend.COHERENT_QUADRATURE:
        for s in (source_a, source_b):
            if s.p_function is None:
                raise ParameterError(f"{s.describe()} has no P-function; use the Network backend")
        table = classical_joint(
            source_a, source_b, array, phase_nodes=phase_nodes, radial_nodes=radial_nodes,
            tail_tolerance=tail_tolerance, given=given,
        )
    else:
        table = network_mixture(source_a, source_b, array, budget, cache, threads, impl)
        if given is not None:
            table = table.slice(*given)
    return JointCountDistribution(table, source_a, source_b, array)


def marginal(joint: JointCountDistribution, m: int) -> NumberDistribution:
    """Distribution of the count at detector ``m`` (1-based)."""
    if not 1 <= m <= joint.n_detectors:
        raise ParameterError(f"detector index must lie in [1, {joint.n_detectors}], got {m}")
    if joint.table.given is not None and joint.table.given[0] != m - 1:
        raise ParameterError("marginal of a conditioned slice is not a distribution")
    start, pmf = joint.table.marginal_array(m - 1)
    nz = np.flatnonzero(pmf)
    if nz.size == 0:
        raise ParameterError("table has no mass")
    pmf = pmf[nz[0]: nz[-1] + 1]
    lost = max(0.0, 1.0 - float(pmf.sum()))
    return NumberDistribution(start + int(nz[0]), np.minimum(pmf, 1.0), f"marginal({m})", {}, lost)


def expected_mean(joint: JointCountDistribution, m: int) -> float:
    """Mean count at detector ``m`` (1-based) from the source means."""
    mean_a = float(joint.source_a.pmf @ joint.source_a.support)
    mean_b = float(joint.source_b.pmf @ joint.source_b.support)
    return mean_count(joint.array[m - 1], mean_a, mean_b)


def scaling_residual(source_a, source_b, array, q, keep=None, **kwargs) -> tuple[float, JointCountDistribution, JointCountDistribution]:
    """Total variation between the original and the renormalized problem.

    The renormalized problem thins both sources with survival ``q`` and
    magnifies the first ``keep`` detectors by ``1/q``; the original table
    is marginalized onto the same detectors.
    """
    keep = len(array) if keep is None else keep
    scaled = scale_array(array, q, keep)
    orig = mixture_joint(source_a, source_b, array, **kwargs)
    if q == 1 and keep == len(array):
        return 0.0, orig, orig
    new = mixture_joint(binomial_thinning(source_a, q), binomial_thinning(source_b, q), scaled, **kwargs)
    t = orig.table
    if keep < len(array):
        probs = t.probs.sum(axis=tuple(range(keep, len(array))))
        t = CountTable(probs, t.offsets[:keep], t.backend, t.source_desc)
    return total_variation(t, new.table), orig, new
