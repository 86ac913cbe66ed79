"""Equivariant filtering and symmetry analysis on matrix Lie groups.

Submodules:

* ``eqf.groups``     -- matrix Lie group arithmetic (SO(2), SO(3), SE(3), R^n)
* ``eqf.kinematics`` -- lifts, vector fields, input actions, formal extension
* ``eqf.classify``   -- invariance / group-affine classification, decompositions
* ``eqf.filter``     -- the equivariant filter: linearisations, Riccati, stepping
* ``eqf.systems``    -- registry of built-in systems and measurement models
* ``eqf.scenario``   -- TOML scenarios, truth generation, simulation runs
* ``eqf.cli``        -- the ``eqf`` command line tool
"""

__version__ = "0.1.0"
