"""PD gain tuning workbench for a simulated planar arm.

Tunes joint-space PD torque controllers with a two-objective genetic
algorithm (tracking accuracy vs. torque-difference cost), compares tunings
by 2-D hypervolume, and emits torque/position/velocity rollout datasets.
"""

__version__ = "0.1.0"
