"""Benchmark case library: default parameters and initial conditions.

Each case fixes a domain, a grid, and one or two sampled species; the run
configuration can override any of the numeric defaults.  All cases start
from E2 = 0 and an E1 that solves the discrete Poisson problem for the
deposited charge, so the initial Gauss residual is at round-off regardless
of sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .fields import poisson_init, project_l2, zero_state
from .particles import SpeciesParams, UnknownCase, deposit_charge, sample_species
from .splines import SplineSpace

if TYPE_CHECKING:
    from .config import RunConfig

ION_MASS = 200.0
ION_TEMPERATURE = 1.0e-4


@dataclass(frozen=True)
class CaseDefaults:
    """Baseline parameters of one case; a run config may override them."""

    summary: str
    length: float
    n: int
    degree: int
    t_end: float
    n_p: tuple
    substeps: tuple
    b3_amplitude: float = 0.0

    @property
    def n_species(self) -> int:
        return len(self.n_p)


CASES = {
    "weibel": CaseDefaults(
        summary="anisotropic Maxwellian driving a magnetic instability",
        length=2.0 * math.pi / 1.25,
        n=32,
        degree=3,
        t_end=500.0,
        n_p=(100_000,),
        substeps=(1,),
        b3_amplitude=1.0e-4,
    ),
    "two_stream": CaseDefaults(
        summary="counter-streaming electron beams at +-2.4",
        length=10.0 * math.pi,
        n=64,
        degree=3,
        t_end=200.0,
        n_p=(64_000,),
        substeps=(1,),
    ),
    "ion_acoustic": CaseDefaults(
        summary="warm electrons plus cold perturbed ions (m_i=200)",
        length=10.0,
        n=32,
        degree=3,
        t_end=100.0,
        n_p=(128_000, 128_000),
        substeps=(1, 1),
    ),
    "thermal": CaseDefaults(
        summary="uniform Maxwellian on a grid 10x coarser than the Debye length",
        length=50.0 * math.pi,
        n=64,
        degree=3,
        t_end=100.0,
        n_p=(10_000,),
        substeps=(1,),
    ),
}


def case_defaults(case: str) -> CaseDefaults:
    try:
        return CASES[case]
    except KeyError:
        known = ", ".join(sorted(CASES))
        raise UnknownCase(f"unknown case {case!r}; known cases: {known}") from None


def species_templates(case: str, length: float):
    """Sampling parameters of each species, listed electrons first."""
    if case == "weibel":
        sigma1 = 0.02 / math.sqrt(2.0)
        return (
            SpeciesParams(
                q=-1.0, m=1.0, length=length, sigma1=sigma1, sigma2=math.sqrt(12.0) * sigma1
            ),
        )
    if case == "two_stream":
        return (
            SpeciesParams(
                q=-1.0, m=1.0, length=length, sigma1=1.0, sigma2=1.0, v1_drifts=(-2.4, 2.4)
            ),
        )
    if case == "ion_acoustic":
        sigma_i = math.sqrt(ION_TEMPERATURE / ION_MASS)
        return (
            SpeciesParams(q=-1.0, m=1.0, length=length, sigma1=1.0, sigma2=1.0),
            SpeciesParams(
                q=1.0,
                m=ION_MASS,
                length=length,
                sigma1=sigma_i,
                sigma2=sigma_i,
                alpha=0.2,
                k_mode=2.0 * math.pi / length,
            ),
        )
    if case == "thermal":
        return (SpeciesParams(q=-1.0, m=1.0, length=length, sigma1=0.2, sigma2=0.2),)
    case_defaults(case)
    raise UnknownCase(f"case {case!r} has no species table")


def init_case(config: RunConfig):
    """Build the spline space, initial fields, and sampled species of a run.

    Each species draws from an independent stream spawned off config.seed,
    in the order listed in the config, so one seed pins the whole state.
    The magnetic field (Weibel only) is the L2 projection of beta*cos(kx)
    onto the 1-form space, k being the box wavenumber.
    """
    defaults = case_defaults(config.case)
    space = SplineSpace(config.p, config.n, config.length)
    templates = species_templates(config.case, config.length)
    streams = np.random.SeedSequence(config.seed).spawn(len(templates))
    species = [
        sample_species(replace(tmpl, q=sc.q, m=sc.m), sc.n_p, seed=stream)
        for tmpl, sc, stream in zip(templates, config.species, streams)
    ]
    fields = zero_state(space)
    if defaults.b3_amplitude != 0.0:
        beta = defaults.b3_amplitude
        k = 2.0 * math.pi / config.length
        fields.b3 = project_l2(space.lowered(), lambda x: beta * np.cos(k * x))
    rho = deposit_charge(species, space)
    rho -= rho.mean()
    fields.e1 = poisson_init(-rho, space)
    return space, fields, species
