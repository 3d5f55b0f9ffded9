"""Training and weight export for the droidseq sequence classifier.

Communicates with the scanner exclusively through files: label-prefixed
id dumps in, SQMW weight containers and reference-vector files out.
"""

from .corpus import (CorpusError, MotifLargerThanLengthError,
                     SyntheticCorpusSpec, contains_motif,
                     expand_with_repetition, generate_synthetic_corpus,
                     read_corpus, write_corpus)
from .export import (export, format_reference_file, parse_reference_file,
                     reference_vectors, serialize_weights)
from .train import (DivergedError, SequenceClassifier, TrainedModel,
                    TrainingConfig, TrainingError, pad_or_truncate,
                    split_corpus, train)

__version__ = "0.1.0"
