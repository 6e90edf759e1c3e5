"""scattermem: secret-shared scattered memory library and secure-memory simulator.

The package has two layers:

* a codec/layout library implementing finite-field secret sharing of memory
  blocks with seed-based integrity (``field``, ``codec``, ``layout``,
  ``stash``, ``controller``), and
* a trace-driven simulator comparing protection schemes by transaction count
  and modeled time (``pathoram``, ``ctr_baseline``, ``engine``,
  ``workloads``, ``analysis``, ``cli``).
"""

__version__ = "0.1.0"
