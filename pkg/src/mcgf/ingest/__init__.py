"""Rating tensors, CSV formats, per-user splits and synthetic data."""

from mcgf.ingest.io import LONG, WIDE, ParseError, load_ratings, save_ratings
from mcgf.ingest.split import SplitSpec, fold_sizes, split
from mcgf.ingest.synthetic import LADDER, SyntheticSpec, generate_synthetic, ladder_specs
from mcgf.ingest.tensor import RatingTensor, TensorError

__all__ = [
    "LADDER", "LONG", "WIDE", "ParseError", "RatingTensor", "SplitSpec", "SyntheticSpec",
    "TensorError", "fold_sizes", "generate_synthetic", "ladder_specs", "load_ratings",
    "save_ratings", "split",
]
