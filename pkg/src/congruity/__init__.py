"""Hierarchical cross-modal congruity engine.

Scores how well a text matches an image (and optionally an external
knowledge sequence) at two levels: token-vs-patch similarity refined by
cross attention, and group-vs-group similarity propagated over dependency
and grid graphs. A fused classifier turns the scores into an
incongruity prediction, trainable end to end on a from-scratch
reverse-mode autodiff core.
"""

from .config import Config
from .data import (ProjectionMLP, Sample, load_manifest, make_batch,
                   make_sample, project, write_manifest)
from .errors import (CongruityError, ConfigError, ContractError, DataError,
                     FormatError, ShapeError)
from .fusion import CongruityBundle
from .graphs import ModalityGraph, build_grid_graph, build_text_graph
from .gradcheck import check_model_gradients
from .model import (ModelDims, classifier_input_width, count_params,
                    dims_from_samples, forward_sample, init_params)
from .optim import AdamState, adam_step
from .synth import SyntheticSpec, gen_synthetic, write_synthetic
from .tensor import (Tape, Tensor, backward, concat, cross_entropy, dropout,
                     layer_norm_rows, leaky_relu, matmul, softmax_rows,
                     zero_grads)
from .train import Checkpoint, Metrics, evaluate, evaluate_checkpoint, train

__version__ = "0.1.0"
