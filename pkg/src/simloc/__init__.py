"""Eigenstate moments of the Anderson model on a simplex.

Monte Carlo ensembles with a self-contained eigensolver, analytic
thermodynamic-limit and finite-N moment formulas, and small-N checks of the
single-field representation.
"""
__version__ = "0.1.0"
