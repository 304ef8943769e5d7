"""Program generation, differential testing and the sample corpus."""
from .corpus import corpus_dir, corpus_names, corpus_source, load_all, load_corpus
from .diff import (
    EDGE_INPUTS, EQUAL, FUEL_SCALE, MISMATCH, ORIGINAL_FUEL_EXHAUSTED, DeadCoverage, DiffVerdict,
    Divergence, dead_code_coverage_check, dead_sites, differential_test, standard_inputs,
)
from .generator import FEATURES, GenConfig, features_used, gen_program

__all__ = [
    "EDGE_INPUTS", "EQUAL", "FEATURES", "FUEL_SCALE", "MISMATCH", "ORIGINAL_FUEL_EXHAUSTED",
    "DeadCoverage", "DiffVerdict", "Divergence", "GenConfig", "corpus_dir", "corpus_names",
    "corpus_source", "dead_code_coverage_check", "dead_sites", "differential_test",
    "features_used", "gen_program", "load_all", "load_corpus", "standard_inputs",
]
