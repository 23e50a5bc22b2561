"""Teacher/Student trainable visualization on a small numpy autodiff engine."""
from .autodiff import Graph, Parameter
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (CheckpointShapeError, CheckpointVersionError, ContractError, DimensionError,
                     DivergenceError, FormatError, ParameterError, TsvizError)
from .gradcheck import gradcheck, gradcheck_fn
from .network import NetworkConfig, TeacherStudentModel, forward, multitask_loss
from .perturbation import cluster_stats, localization_iou, mean_aopc, perturb_image
from .synth import generate
from .trainer import TrainConfig, evaluate, train
from .viz import (Heatmap, explain, gradcam, gradient_saliency, heatmap_from_reconstruction,
                  normalize, threshold_mask)

__version__ = "0.1.0"
