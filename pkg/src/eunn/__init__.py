"""Efficient unitary recurrent networks built from layers of 2x2 rotations."""

from .cell import EurnnCell, SequenceBatch, VanillaCell, init_eurnn, init_vanilla, sequence_forward_backward
from .complex_core import haar_unitary, make_rng
from .optim import RmsPropState, TrainConfig, rmsprop_step, train
from .unitary import (AngleProgram, UnitaryComposition, apply, decompose_unitary, fft, materialize,
                      projective_update, reconstruct, tunable)

__version__ = "0.1.0"
