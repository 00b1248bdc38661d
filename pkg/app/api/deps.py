"""Shared builders for the command handlers"""

import numpy as np

from app.models.experiment import ExperimentConfig, InitialField, RunContext
from app.models.fields import GaugeField
from app.models.lattice import Domain
from app.services.instanton import bpst


def seeded_rng(context: RunContext) -> np.random.Generator:
    return np.random.default_rng(context.seed)


def field_center(domain: Domain) -> list:
    """Origin of balls and annuli, middle of the torus box"""
    if domain.periodic:
        return [domain.L / 2.0] * 4
    return [0.0] * 4


def initial_field(config: ExperimentConfig, rng: np.random.Generator) -> GaugeField:
    """
    Builds the starting connection of a run

    Args:
        config: Experiment configuration (lattice and physics sections)
        rng: Generator for the optional random perturbation

    Returns:
        GaugeField: Flat or instanton field plus amplitude times a random 1-form on the support
    """
    domain = config.lattice.domain()
    physics = config.physics
    if physics.initial == InitialField.BPST:
        A = bpst(domain, physics.scale, center=field_center(domain))
    else:
        A = GaugeField.flat(domain)
    if physics.amplitude > 0.0:
        noise = rng.standard_normal(A.values.shape)
        support = domain.geometry.support[None, ..., None]
        A = A.with_values(A.values + physics.amplitude * np.where(support, noise, 0.0))
    return A
