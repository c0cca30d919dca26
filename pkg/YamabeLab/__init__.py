"""
Numerical lab for singular Yamabe metrics of negative scalar curvature on
domains of the round sphere, the flat space and the hyperbolic space.

The package solves the conformal Yamabe equation on exhaustions of a
singular domain by shrinking excised balls and tubes, compares the fields
with closed-form metrics and probes whether the conformal Ricci curvature
stays bounded near the singular set.

Use it from python or through the ``yamabe-lab`` command line driven by a
TOML scenario file.
"""

__author__ = 'YamabeLab developers'

__all__ = ["exceptions", "cfg", "utils", "conformal_core", "closed_forms",
           "grids", "elliptic_solver", "exhaustion", "blowup_probe",
           "encode", "decode", "storage", "scenario", "apps"]
