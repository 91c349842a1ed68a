"""Deformable-model segmentation: electrostatic, heat-diffusion and united
image forces driving parametric snakes and narrow-band level sets."""

from .forces import (ElectroParams, HeatParams, StaticForce, UnitedForce, UnitedParams,
                     build_force_source, electrostatic_potential, force_from_potential,
                     heat_potential, k_schedule, united_force)
from .grid import (GrayImage, ScalarField, VectorField, edge_map, gradient, load_pgm, save_pgm,
                   synth_circle, synth_t_shape)
from .levelset import (GacParams, LevelSet, curvature_field, evolve_gac, extract_zero_contour,
                       gac_step, init_from_contour, rebuild_band)
from .report import EvolutionReport
from .snakes import (Contour, SnakeParams, elastic_term, evolve_snake, outward_normals, resample,
                     sample_force, snakes_step)

__version__ = "0.1.0"

__all__ = [
    "Contour", "ElectroParams", "EvolutionReport", "GacParams", "GrayImage", "HeatParams",
    "LevelSet", "ScalarField", "SnakeParams", "StaticForce", "UnitedForce", "UnitedParams",
    "VectorField", "build_force_source", "curvature_field", "edge_map", "elastic_term",
    "electrostatic_potential", "evolve_gac", "evolve_snake", "extract_zero_contour",
    "force_from_potential", "gac_step", "gradient", "heat_potential", "init_from_contour",
    "k_schedule", "load_pgm", "outward_normals", "rebuild_band", "resample", "sample_force",
    "save_pgm", "snakes_step", "synth_circle", "synth_t_shape", "united_force",
]
