from .base import Model
from .io import load_model, register_backend, save_model
from .neural import TinyNeuralModel, corpus_model, train_memorization
from .tabular import TabularModel, build_tabular_world

__all__ = [
    "Model",
    "TabularModel",
    "TinyNeuralModel",
    "build_tabular_world",
    "corpus_model",
    "train_memorization",
    "save_model",
    "load_model",
    "register_backend",
]
