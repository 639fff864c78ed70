"""Faithfulness metrics for feature attributions and their diagnosticity evaluation."""

from .core import (ClassificationInstance, InterpretationPair, as_interpretation, rank_tokens,
                   remove_tokens, retain_tokens, top_k_count)
from .diagnosticity import (ComplexityReport, DiagnosticityEstimate, GoldenSet,
                            estimate_diagnosticity, generate_golden_set, load_golden_set,
                            measure_time_complexity, save_golden_set)
from .interpreters import (INTERPRETERS, InterpreterConfig, interpret_integrated_gradients,
                           interpret_lime, interpret_random, interpret_saliency,
                           interpret_word_omission)
from .metrics import (ALL_METRICS, DEFAULT_B, FaithfulnessScore, Metric, comp, compare, corr,
                      dffot, dfmit, evaluate, mono, pearson, suff)
from .models import (MeteredModel, Prediction, TrainConfig, Vocabulary, read_pass_counter,
                     reset_pass_counter, train)

__version__ = "0.1.0"
