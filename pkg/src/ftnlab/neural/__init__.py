"""Minimal numpy neural-network engine: layers, losses, Adam, training loop, model files."""

from .layers import BatchNorm, Conv1D, Crop, Dense, LeakyReLU, Residual, residual_add
from .loss import lbce_loss, mse_loss
from .model import LayerSpec, Model, cnn_specs, dnn_specs, mac_count
from .optim import Adam, PlateauTracker, adam_step, lr_schedule_and_stop
from .serialize import load_model, save_model
from .train import TrainConfig, TrainResult, train

__all__ = [
    "Adam", "BatchNorm", "Conv1D", "Crop", "Dense", "LayerSpec", "LeakyReLU", "Model",
    "PlateauTracker", "Residual", "TrainConfig", "TrainResult", "adam_step", "cnn_specs",
    "dnn_specs", "lbce_loss", "load_model", "lr_schedule_and_stop", "mac_count", "mse_loss",
    "residual_add", "save_model", "train",
]
