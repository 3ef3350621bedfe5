"""Feature-fusion framework for multimodal irregular time-series
classification: encoders, fusion pipelines, gated LSTM variants, exact
ranking metrics, a synthetic event-stream generator, and a training CLI."""

from .numerics import Tensor, Rng, Adam, AdamState, adam_step, check_gradients
from .events import (Attribute, Event, Sequence, Dataset, Vocab,
                     parse_dataset, serialize_dataset, build_vocab,
                     pad_attributes)
from .synth import SynthSpec, generate_dataset
from .metrics import auc, average_precision
from .harness import RunConfig, load_config, train, evaluate, compare

__version__ = "0.1.0"
