"""Chained Bell inequality under coincidence-time losses.

Closed-form bounds (:mod:`.bounds`), the adversarial local model and its exact
oracle (:mod:`.lhv`), coincidence matching (:mod:`.coincidence`) and a seeded
Monte Carlo harness (:mod:`.experiment`).
"""

__version__ = "0.1.0"
