"""cfstab: a lab for the retraining-stability of counterfactual explanations.

Deterministic dense ReLU classifiers, four counterfactual generators
(min-cost elastic-net l1/l2, min-epsilon PGD, stable neighbor search),
leave-one-out / random-seed retraining ensembles with invalidation metrics,
and numerical verifiers for the boundary-geometry and Lipschitz results the
method rests on.
"""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
