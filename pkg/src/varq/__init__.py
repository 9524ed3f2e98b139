"""varq: probabilistic-variational dynamics at desk scale.

Subpackages cover the classical multiplier-field transport (`mechanics`),
its diffusion-current extension (`hydrodynamics`), the canonical map to
linear Schrodinger evolution (`wavefunction`), discrete spin-like systems
(`discrete`), covariant classical field theory in 1+1 dimensions
(`covariant`), the quantum scalar-field sector (`quantum_fields`), and the
batch scenario front end (`cli`).
"""

__version__ = "0.1.0"
