"""Obfuscating passes and the engine that applies them."""
from . import flatten, loops, methods, opaque_passes, ordering, source_passes, substitution, traps, virtualize  # noqa: F401  (registers passes)
from .engine import (
    LEVELS, Context, IneligibleSite, InterleaveError, InvalidParam, NoEligibleSites,
    PassConfig, PassInvariantError, PipelineResult, RegionError, TransformError,
    TransformResult, UnsupportedFeature, UnsupportedTraps, apply_pass, is_known,
    pass_ids, pass_spec, pipeline_order, run_pipeline, variant_ids,
)
from .opaque_passes import insert_opaque_guard
