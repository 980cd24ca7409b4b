"""Joint count distributions: exact kernels, oracle, quadrature, mixtures."""

from .cache import KernelCache
from .classical import classical_joint, coherent_joint
from .mixture import BackendChoice, expected_mean, marginal, mixture_joint, scaling_residual, select_backend
from .network import DEFAULT_BUDGET, configuration_count, fock_joint, fock_kernels
from .oracle import moment_oracle
from .tables import Backend, CountTable, JointCountDistribution, total_variation

__all__ = [
    "Backend",
    "BackendChoice",
    "CountTable",
    "DEFAULT_BUDGET",
    "JointCountDistribution",
    "KernelCache",
    "classical_joint",
    "coherent_joint",
    "configuration_count",
    "expected_mean",
    "fock_joint",
    "fock_kernels",
    "marginal",
    "mixture_joint",
    "moment_oracle",
    "scaling_residual",
    "select_backend",
    "total_variation",
]
