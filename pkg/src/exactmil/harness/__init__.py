"""Synthetic weak-supervision experiment: scenes, toy model, training, evaluation."""

from .model import ConvLayer, ModelParams, init_params, model_backward, model_forward, zero_params
from .scenes import GlyphTemplate, SceneSample, generate_scene, make_templates, stream
from .training import Metrics, TrainConfig, evaluate, evaluation_sets, nll_objective, train
