"""Illicit-account detection on directed transaction multigraphs.

Pipeline: :mod:`diam.ingest` or :mod:`diam.synth` produce a
:class:`~diam.graph.Multigraph` and labels; :mod:`diam.seqgen` turns each
node's edges into chronological attribute sequences; :mod:`diam.model`
encodes them with direction-specific GRUs, stacks discrepancy-aware
message-passing layers and classifies; :mod:`diam.train` fits it with Adam on
sampled mini-batches (:mod:`diam.sampler`); :mod:`diam.metrics` scores it.
"""

from .graph import EdgeRecord, LabelSet, Multigraph
from .ingest import SplitAssignment, load_edges, load_labels, split
from .model import ModelParams, forward
from .seqgen import EdgeSequences, SequenceBank, build_all, build_sequences
from .synth import SynthConfig, generate
from .train import TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "EdgeRecord", "EdgeSequences", "LabelSet", "ModelParams", "Multigraph", "SequenceBank",
    "SplitAssignment", "SynthConfig", "TrainConfig", "build_all", "build_sequences", "forward",
    "generate", "load_edges", "load_labels", "predict", "split", "train",
]
