"""Predictive runtime monitoring with STL-U over Gaussian flowpipes."""
from .calibrate import (CF_WEIGHTS, SAT_WEIGHTS, CalibrationWeights, EvalMetrics, LabeledPair,
                        Sample, SelectionResult, average_loss, eval_metrics, g_components,
                        indicators_sat, loss_cf, loss_sat, select_schema)
from .confidence import (IntervalSet, Piece, atom_strong_range, atom_weak_range, is_complement,
                         is_intersect, is_union, strong_range, weak_range)
from .core import (ConfidenceInterval, Flowpipe, GaussianPoint, Trace, confidence_interval,
                   coverage, coverage_level, flowpipe_from_samples, quantile, trace_in_flowpipe,
                   validate_flowpipe)
from .errors import (ConfidenceRangeError, ConfidenceRequiredError, EvalError, HorizonError,
                     ParameterError, ParseError, ShapeError, SingleVariableError, STLUError)
from .formula import (Always, And, Atom, Eventually, Formula, Interval, Not, Or, Until, parse,
                      parse_expr, to_text)
from .monitor import Verdict, strong_sat, trace_sat, verdict, weak_sat
from .predictor import SRT, Schema, ToyARModel, ar_generator, fit_ar, mc_predict, sample_mask

__version__ = "0.1.0"
