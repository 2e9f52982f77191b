"""Noisy recurrent networks on regular-language streams, distilled into DFAs."""

from .automata import Dfa, equivalent, isomorphic, minimize, to_dot
from .langdata import (
    ALL_PROBLEMS,
    Alphabet,
    GroundTruth,
    SymbolStream,
    generate_long_string,
    generate_stream,
    make_problem,
)
from .rnn import RnnConfig, RnnModel, init_model, load_model, save_model, train

__all__ = [
    "ALL_PROBLEMS",
    "Alphabet",
    "Dfa",
    "GroundTruth",
    "RnnConfig",
    "RnnModel",
    "SymbolStream",
    "equivalent",
    "generate_long_string",
    "generate_stream",
    "init_model",
    "isomorphic",
    "load_model",
    "make_problem",
    "minimize",
    "save_model",
    "to_dot",
    "train",
]
