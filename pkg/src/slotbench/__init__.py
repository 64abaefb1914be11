"""slotbench: object-centric representation learning on a block-pushing table.

Subpackages: scenegen (environment + datasets), slotcore (slot attention),
baselines (autoencoder, momentum-contrast), localize (PCK probes), policy
(behavior cloning + rollout eval), harness (configs, runs, reports).
"""

__version__ = "0.1.0"
