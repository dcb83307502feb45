"""Permit-to-work governance engine.

Core pieces: the permit lifecycle state machine (``model``, ``transitions``,
``engine``), Stage-2 rule validation (``validation``), RBAC (``rbac``), the
hash-chained audit ledger (``ledger``), linked registries (``registries``),
expiry sweeps and the notification outbox (``notifications``), the service
facade (``service``), the HTTP API (``api``) and the load/metrics simulator
(``sim``).
"""

__version__ = "0.1.0"
