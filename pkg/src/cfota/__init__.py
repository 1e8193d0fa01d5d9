"""Over-the-air federated learning on user-centric cell-free networks.

Simulation and analysis package: network geometry and clustering
(topology), correlated Rayleigh channels with CSI error models
(channel), analog aggregation of model updates (aircomp), the
federated training loop (fl), the closed-form convergence bound
(bounds), Monte-Carlo verification of the combining statistics
(verify), and experiment drivers plus a CLI (harness).
"""

__version__ = "0.1.0"

from . import aircomp, bounds, channel, fl, tasks, topology, verify
from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "aircomp",
    "bounds",
    "channel",
    "fl",
    "tasks",
    "topology",
    "verify",
    "KERNEL_BACKEND",
    "__version__",
]
