"""Exact moment relations for the Gaussian matrix model with an external field.

Submodules: ``series`` (truncated series in the times), ``schurq`` (Schur Q
functions), ``wick`` (exact Gaussian moments), ``pfaffian``, ``relations``
(relation families and verification), ``reduce`` (linearization of bilinear
relations), ``quadrature`` (numerical partition-function checks) and ``cli``.
"""

__version__ = "0.1.0"
